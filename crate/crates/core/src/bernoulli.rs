//! Per-tag Bernoulli particle filter.
//!
//! A belief holds an existence probability `r` and a weighted particle cloud
//! for the spatial density. Updates use the per-particle factor
//! `1 − P_D + P_D·Σ_z L(z|x)/(λc)`; its weighted mean is `1 − Δ`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_difference, compass_bearing, Point3, SearchArea, UavState};
use crate::propagation::{detection_probability_for_level, ideal_rssi, interval_detection_probability, GainPattern, RadioParams};
use crate::stats::{normal_interval_mass, normal_pdf, wrapped_normal_pdf};
use crate::terrain::TerrainGrid;

/// Floor applied to per-particle update factors before normalization.
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("all particle weights are zero or non-finite")]
    DegenerateWeights,
    #[error("belief has no particles")]
    Empty,
    #[error("belief csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliBelief {
    pub r: f64,
    pub particles: Vec<Point3>,
    pub weights: Vec<f64>,
}

impl BernoulliBelief {
    /// Equal-weight belief over the given particles.
    pub fn from_particles(r: f64, particles: Vec<Point3>) -> Self {
        let n = particles.len();
        Self {
            r,
            particles,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// `n` particles drawn from `birth`.
    pub fn from_birth<B: BirthDensity, R: Rng + ?Sized>(n: usize, r: f64, birth: &B, rng: &mut R) -> Self {
        let particles = (0..n).map(|_| birth.sample(rng)).collect();
        Self::from_particles(r, particles)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Rescales weights to sum to one. Fails when the total is not positive.
    pub fn normalize(&mut self) -> Result<(), FilterError> {
        let total: f64 = self.weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(FilterError::DegenerateWeights);
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        Ok(())
    }

    pub fn effective_sample_size(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let sq: f64 = self.weights.iter().map(|w| w * w).sum();
        if sq > 0.0 {
            total * total / sq
        } else {
            0.0
        }
    }

    pub fn mean(&self) -> Point3 {
        let total: f64 = self.weights.iter().sum();
        let mut m = Point3::default();
        for (p, w) in self.particles.iter().zip(&self.weights) {
            m.x += w * p.x;
            m.y += w * p.y;
            m.z += w * p.z;
        }
        Point3::new(m.x / total, m.y / total, m.z / total)
    }
}

/// Sampler for newborn particles.
pub trait BirthDensity {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point3;
}

/// Uniform over the search area footprint, `height` above the ground.
#[derive(Debug, Clone, Copy)]
pub struct UniformBirth<'a> {
    pub area: SearchArea,
    pub ground: Option<&'a TerrainGrid>,
    pub height: f64,
}

impl<'a> UniformBirth<'a> {
    pub fn new(area: SearchArea, ground: Option<&'a TerrainGrid>, height: f64) -> Self {
        Self { area, ground, height }
    }
}

impl BirthDensity for UniformBirth<'_> {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point3 {
        let x = self.area.min_x + rng.random::<f64>() * self.area.width();
        let y = self.area.min_y + rng.random::<f64>() * self.area.height();
        let ground = match self.ground {
            Some(g) => g.elevation_at(x, y).unwrap_or_else(|_| g.elevation_range().0),
            None => 0.0,
        };
        Point3::new(x, y, ground + self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsModel {
    /// Diagonal of the per-step process covariance, m².
    pub process_variance: [f64; 3],
    pub survival: f64,
    pub birth: f64,
}

impl Default for DynamicsModel {
    fn default() -> Self {
        Self {
            process_variance: [2.5, 2.5, 0.0025],
            survival: 0.999,
            birth: 1e-5,
        }
    }
}

/// Prediction step. Survivors take a random-walk step; newborn particles are
/// added in proportion to the birth mass and the cloud is resampled back to
/// its original size.
pub fn predict<B: BirthDensity, R: Rng + ?Sized>(
    belief: &mut BernoulliBelief,
    dynamics: &DynamicsModel,
    birth: &B,
    rng: &mut R,
) {
    let n = belief.len();
    let born = dynamics.birth * (1.0 - belief.r);
    let survived = dynamics.survival * belief.r;
    let total = born + survived;
    let sd = dynamics.process_variance.map(f64::sqrt);
    for p in belief.particles.iter_mut() {
        let e: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        p.x += sd[0] * e[0];
        p.y += sd[1] * e[1];
        p.z += sd[2] * e[2];
    }
    belief.r = total.clamp(0.0, 1.0);
    if total <= 0.0 || n == 0 {
        return;
    }
    let n_birth = (n as f64 * born / total).round() as usize;
    if n_birth == 0 {
        return;
    }
    let survivor_share = survived / total;
    let sum: f64 = belief.weights.iter().sum();
    for w in belief.weights.iter_mut() {
        *w *= survivor_share / sum;
    }
    let birth_weight = (born / total) / n_birth as f64;
    for _ in 0..n_birth {
        belief.particles.push(birth.sample(rng));
        belief.weights.push(birth_weight);
    }
    resample_to(belief, n, rng).expect("birth mass is positive");
}

/// Expected count and uniform density of false measurements per scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterModel {
    pub lambda: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ClutterModel {
    pub fn rssi(lambda: f64) -> Self {
        Self { lambda, lo: -120.0, hi: 0.0 }
    }

    pub fn aoa(lambda: f64) -> Self {
        Self {
            lambda,
            lo: 0.0,
            hi: std::f64::consts::TAU,
        }
    }

    pub fn density(&self) -> f64 {
        1.0 / (self.hi - self.lo)
    }

    /// `λ·c(z)`.
    pub fn intensity(&self) -> f64 {
        self.lambda * self.density()
    }

    /// With probability `min(1, λ)` one false measurement for this scan.
    pub fn sample_scan<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let hit = rng.random::<f64>() < self.lambda.min(1.0);
        hit.then(|| self.lo + rng.random::<f64>() * (self.hi - self.lo))
    }
}

/// Single-object measurement model seen by the filter.
pub trait MeasurementModel {
    fn detection_probability(&self, x: &Point3) -> f64;

    fn likelihood(&self, z: f64, x: &Point3) -> f64;

    /// Noise-free measurement the model would predict at `x`.
    fn ideal_measurement(&self, x: &Point3) -> Option<f64>;

    /// `(P_D(x), Σ_z L(z|x))`. Override when both share work.
    fn terms(&self, x: &Point3, measurements: &[f64]) -> (f64, f64) {
        let pd = self.detection_probability(x);
        let sum = measurements.iter().map(|&z| self.likelihood(z, x)).sum();
        (pd, sum)
    }
}

pub fn rssi_precise_likelihood(z: f64, h: f64, sigma: f64) -> f64 {
    normal_pdf(z, h, sigma)
}

/// Gaussian likelihood integrated over the unknown model bias
/// `μ ∈ [μ_min, μ_max]`: `Φ((z−h−μ_min)/σ) − Φ((z−h−μ_max)/σ)`.
pub fn rssi_imprecise_likelihood(z: f64, h: f64, sigma: f64, mu_min: f64, mu_max: f64) -> f64 {
    normal_interval_mass(h + mu_min, h + mu_max, z, sigma)
}

/// Gaussian in the wrapped residual between `z` and the bearing from the
/// UAV to `x`. `None` when the two are horizontally coincident.
pub fn aoa_likelihood(z: f64, x: &Point3, uav: &UavState, sigma: f64) -> Option<f64> {
    let h = compass_bearing(&uav.position, x)?;
    Some(wrapped_normal_pdf(angle_difference(z, h), sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum RssiLikelihood {
    Precise { sigma: f64 },
    Imprecise { sigma: f64, mu_min: f64, mu_max: f64 },
}

impl RssiLikelihood {
    #[inline]
    pub fn evaluate(&self, z: f64, h: f64) -> f64 {
        match *self {
            RssiLikelihood::Precise { sigma } => rssi_precise_likelihood(z, h, sigma),
            RssiLikelihood::Imprecise { sigma, mu_min, mu_max } => {
                rssi_imprecise_likelihood(z, h, sigma, mu_min, mu_max)
            }
        }
    }

    /// Offset from `h` to the centre of the likelihood in `z`.
    pub fn center_offset(&self) -> f64 {
        match *self {
            RssiLikelihood::Precise { .. } => 0.0,
            RssiLikelihood::Imprecise { mu_min, mu_max, .. } => 0.5 * (mu_min + mu_max),
        }
    }

    /// Bias interval the likelihood allows; zero width when precise.
    pub fn bias_interval(&self) -> (f64, f64) {
        match *self {
            RssiLikelihood::Precise { .. } => (0.0, 0.0),
            RssiLikelihood::Imprecise { mu_min, mu_max, .. } => (mu_min, mu_max),
        }
    }
}

/// How the filter evaluates the RSSI detection probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionModel {
    /// Threshold model at the ideal level shifted by `offset_db`.
    Analytic { offset_db: f64 },
    /// Threshold model averaged over a bias uniform on the interval.
    Interval { mu_min: f64, mu_max: f64 },
    Constant(f64),
}

/// RSSI model built on the ideal log-distance prediction from one UAV pose.
#[derive(Debug, Clone, Copy)]
pub struct RssiModel<'a> {
    pub uav: UavState,
    pub params: &'a RadioParams,
    pub pattern: &'a GainPattern,
    pub likelihood: RssiLikelihood,
    pub detection: DetectionModel,
}

impl RssiModel<'_> {
    #[inline]
    fn level(&self, x: &Point3) -> f64 {
        // a particle exactly at the antenna is treated as being at the reference distance
        ideal_rssi(x, &self.uav, self.params, self.pattern).unwrap_or(self.params.source_dbm)
    }

    #[inline]
    fn pd_at_level(&self, h: f64) -> f64 {
        match self.detection {
            DetectionModel::Analytic { offset_db } => detection_probability_for_level(h + offset_db, self.params),
            DetectionModel::Interval { mu_min, mu_max } => {
                interval_detection_probability(h, mu_min, mu_max, self.params)
            }
            DetectionModel::Constant(p) => p,
        }
    }
}

impl MeasurementModel for RssiModel<'_> {
    fn detection_probability(&self, x: &Point3) -> f64 {
        self.pd_at_level(self.level(x))
    }

    fn likelihood(&self, z: f64, x: &Point3) -> f64 {
        self.likelihood.evaluate(z, self.level(x))
    }

    fn ideal_measurement(&self, x: &Point3) -> Option<f64> {
        Some(self.level(x) + self.likelihood.center_offset())
    }

    fn terms(&self, x: &Point3, measurements: &[f64]) -> (f64, f64) {
        let h = self.level(x);
        let sum = measurements.iter().map(|&z| self.likelihood.evaluate(z, h)).sum();
        (self.pd_at_level(h), sum)
    }
}

/// AoA model with certain detection. A particle directly below the UAV gets
/// the uniform density since its bearing is undefined.
#[derive(Debug, Clone, Copy)]
pub struct AoaModel {
    pub uav: UavState,
    pub sigma: f64,
}

impl MeasurementModel for AoaModel {
    fn detection_probability(&self, _x: &Point3) -> f64 {
        1.0
    }

    fn likelihood(&self, z: f64, x: &Point3) -> f64 {
        aoa_likelihood(z, x, &self.uav, self.sigma).unwrap_or(1.0 / std::f64::consts::TAU)
    }

    fn ideal_measurement(&self, x: &Point3) -> Option<f64> {
        compass_bearing(&self.uav.position, x)
    }
}

/// Closure-backed model, mostly for tests and toy problems.
pub struct FnModel<P, L> {
    pub pd: P,
    pub likelihood: L,
}

impl<P, L> MeasurementModel for FnModel<P, L>
where
    P: Fn(&Point3) -> f64,
    L: Fn(f64, &Point3) -> f64,
{
    fn detection_probability(&self, x: &Point3) -> f64 {
        (self.pd)(x)
    }

    fn likelihood(&self, z: f64, x: &Point3) -> f64 {
        (self.likelihood)(z, x)
    }

    fn ideal_measurement(&self, _x: &Point3) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateDiagnostics {
    pub r_prior: f64,
    pub r_posterior: f64,
    pub delta: f64,
    /// `r` had to be clamped back into `[0, 1]`.
    pub clamped: bool,
    /// Every particle factor vanished; the prior spatial density was kept.
    pub degenerate: bool,
}

/// Bernoulli update with a (possibly empty) measurement set.
pub fn update<M: MeasurementModel + ?Sized>(
    belief: &mut BernoulliBelief,
    measurements: &[f64],
    model: &M,
    clutter: &ClutterModel,
) -> UpdateDiagnostics {
    let r = belief.r;
    let lc = clutter.intensity();
    let no_clutter = lc <= 0.0 && !measurements.is_empty();
    let mut factors = Vec::with_capacity(belief.len());
    let mut num = 0.0;
    for (x, w) in belief.particles.iter().zip(&belief.weights) {
        let (pd, lsum) = model.terms(x, measurements);
        let f = if no_clutter {
            pd * lsum
        } else if measurements.is_empty() {
            1.0 - pd
        } else {
            1.0 - pd + pd * lsum / lc
        };
        num += w * f;
        factors.push(f);
    }
    let total_w: f64 = belief.weights.iter().sum();
    num /= total_w;

    let mut diag = UpdateDiagnostics {
        r_prior: r,
        delta: 1.0 - num,
        ..Default::default()
    };
    let mut r_new = if no_clutter {
        if num > 0.0 {
            1.0
        } else {
            r
        }
    } else {
        let den = 1.0 - r + r * num;
        if den > 0.0 {
            num * r / den
        } else {
            0.0
        }
    };
    if !(0.0..=1.0).contains(&r_new) || r_new.is_nan() {
        log::debug!("existence probability {r_new} clamped");
        diag.clamped = true;
        r_new = if r_new.is_nan() { r } else { r_new.clamp(0.0, 1.0) };
    }
    if num > 0.0 && num.is_finite() {
        for (w, f) in belief.weights.iter_mut().zip(&factors) {
            *w *= f.max(WEIGHT_FLOOR);
        }
        if belief.normalize().is_err() {
            // the floor keeps this unreachable for finite factors
            diag.degenerate = true;
            belief.weights.iter_mut().for_each(|w| *w = 1.0);
            belief.normalize().expect("uniform weights");
        }
    } else {
        diag.degenerate = true;
    }
    if diag.degenerate {
        let total: f64 = belief.weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            let n = belief.len() as f64;
            belief.weights.iter_mut().for_each(|w| *w = 1.0 / n);
        }
    }
    belief.r = r_new;
    diag.r_posterior = r_new;
    diag
}

/// Systematic resampling to `n` equal-weight particles.
pub fn resample_to<R: Rng + ?Sized>(belief: &mut BernoulliBelief, n: usize, rng: &mut R) -> Result<(), FilterError> {
    if belief.is_empty() {
        return Err(FilterError::Empty);
    }
    let total: f64 = belief.weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(FilterError::DegenerateWeights);
    }
    let step = total / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cum = belief.weights[0];
    let mut i = 0;
    let last = belief.len() - 1;
    for _ in 0..n {
        while u > cum && i < last {
            i += 1;
            cum += belief.weights[i];
        }
        out.push(belief.particles[i]);
        u += step;
    }
    belief.particles = out;
    belief.weights = vec![1.0 / n as f64; n];
    Ok(())
}

pub fn resample<R: Rng + ?Sized>(belief: &mut BernoulliBelief, rng: &mut R) -> Result<(), FilterError> {
    let n = belief.len();
    resample_to(belief, n, rng)
}

/// Resamples when the effective sample size drops below half the particle
/// count. Returns whether it did.
pub fn resample_if_needed<R: Rng + ?Sized>(belief: &mut BernoulliBelief, rng: &mut R) -> Result<bool, FilterError> {
    if belief.effective_sample_size() < 0.5 * belief.len() as f64 {
        resample(belief, rng)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub mean: Point3,
    /// Row-major `[xx, xy, yx, yy]`.
    pub cov_xy: [f64; 4],
    pub determinant: f64,
    pub localized: bool,
}

pub fn estimate(belief: &BernoulliBelief, n_th: f64) -> EstimateSummary {
    let m = belief.mean();
    let total: f64 = belief.weights.iter().sum();
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (p, w) in belief.particles.iter().zip(&belief.weights) {
        let (dx, dy) = (p.x - m.x, p.y - m.y);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let (sxx, sxy, syy) = (sxx / total, sxy / total, syy / total);
    let determinant = (sxx * syy - sxy * sxy).max(0.0);
    EstimateSummary {
        mean: m,
        cov_xy: [sxx, sxy, sxy, syy],
        determinant,
        localized: determinant <= n_th,
    }
}

/// Writes `# r=<r>` followed by `x,y,z,weight` rows.
pub fn write_belief_csv<W: Write>(belief: &BernoulliBelief, mut out: W) -> Result<(), FilterError> {
    writeln!(out, "# r={}", belief.r)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "z", "weight"])?;
    for (p, wt) in belief.particles.iter().zip(&belief.weights) {
        w.serialize((p.x, p.y, p.z, wt))?;
    }
    w.flush()?;
    Ok(())
}
