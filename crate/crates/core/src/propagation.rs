//! Antenna gain, RSSI synthesis and receiver detection probability.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{compass_bearing, wrap_angle, Point3, UavState};
use crate::stats::{normal_pdf, std_normal_cdf, std_normal_sf};
use crate::terrain::{
    los_profile, terrain_diffraction_loss, vegetation_loss, TerrainError, TerrainGrid,
    VegetationSpec, DEFAULT_PROFILE_SAMPLES,
};

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("tag and observer are horizontally coincident; azimuth is undefined")]
    CoincidentPosition,
    #[error("tag and observer are at zero distance")]
    ZeroDistance,
    #[error("gain table line {line}: {message}")]
    GainTable { line: usize, message: String },
    #[error(transparent)]
    Terrain(#[from] TerrainError),
}

/// Azimuth-only antenna gain, tabulated over relative azimuth and linearly
/// interpolated with wrap-around at 0/2π.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPattern {
    angles: Vec<f64>,
    gains: Vec<f64>,
    /// Set when the table is a full uniform grid starting at 0.
    uniform_step: Option<f64>,
}

impl GainPattern {
    pub fn from_table(angles: Vec<f64>, gains: Vec<f64>) -> Result<Self, PropagationError> {
        let err = |message: String| PropagationError::GainTable { line: 0, message };
        if angles.len() != gains.len() || angles.len() < 2 {
            return Err(err("need at least two (angle, gain) pairs".into()));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(err("angles must be strictly increasing".into()));
        }
        if angles[0] < 0.0 || *angles.last().unwrap() - angles[0] >= TAU {
            return Err(err("angles must lie in [0, 2π) and span less than a full turn".into()));
        }
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(err("gains must be finite".into()));
        }
        let n = angles.len();
        let step = TAU / n as f64;
        let uniform = angles[0] == 0.0
            && angles
                .iter()
                .enumerate()
                .all(|(i, a)| (a - i as f64 * step).abs() < 1e-12);
        Ok(Self {
            angles,
            gains,
            uniform_step: uniform.then_some(step),
        })
    }

    /// Tabulates `f` at 1° resolution.
    pub fn tabulate(f: impl Fn(f64) -> f64) -> Self {
        let angles: Vec<f64> = (0..360).map(|d| (d as f64).to_radians()).collect();
        let gains = angles.iter().map(|&a| f(a)).collect();
        Self::from_table(angles, gains).expect("1° table is valid")
    }

    /// Two-lobe directional pattern with a 4 dB front lobe, a back lobe
    /// 10 dB down and nulls 20 dB below the peak at ±90°.
    pub fn default_synthetic() -> Self {
        const PEAK_DB: f64 = 4.0;
        const NULL_FLOOR: f64 = 0.01;
        // back-lobe amplitude chosen so that P(π)/P(0) is exactly 0.1
        let back = 0.1 * (1.0 + NULL_FLOOR) - NULL_FLOOR;
        let power = |z: f64| {
            let c = z.cos();
            let lobe = if c >= 0.0 { 1.0 } else { back };
            lobe * c * c + NULL_FLOOR
        };
        let peak = power(0.0);
        Self::tabulate(|z| PEAK_DB + 10.0 * (power(z) / peak).log10())
    }

    /// Raised-cosine pattern `g_max − (f2b/2)(1 − cos ζ)`.
    pub fn cosine(g_max: f64, front_to_back: f64) -> Self {
        Self::tabulate(|z| g_max - 0.5 * front_to_back * (1.0 - z.cos()))
    }

    /// Loads a whitespace- or comma-separated two-column table of
    /// (degrees, dB). Lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self, PropagationError> {
        let mut angles = Vec::new();
        let mut gains = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let bad = |message: String| PropagationError::GainTable { line: i + 1, message };
            if fields.len() != 2 {
                return Err(bad(format!("expected 2 columns, found {}", fields.len())));
            }
            let deg: f64 = fields[0]
                .parse()
                .map_err(|_| bad(format!("'{}' is not a number", fields[0])))?;
            let db: f64 = fields[1]
                .parse()
                .map_err(|_| bad(format!("'{}' is not a number", fields[1])))?;
            angles.push(deg.to_radians());
            gains.push(db);
        }
        Self::from_table(angles, gains)
    }

    /// Pattern with the azimuth axis reversed: `G'(ζ) = G(−ζ)`.
    pub fn mirrored(&self) -> Self {
        let angles = self.angles.clone();
        let gains = angles.iter().map(|&a| self.gain_db(-a)).collect();
        Self::from_table(angles, gains).expect("mirrored table keeps the same knots")
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.angles.iter().copied().zip(self.gains.iter().copied())
    }

    #[inline]
    pub fn gain_db(&self, zeta: f64) -> f64 {
        let z = wrap_angle(zeta);
        let n = self.angles.len();
        if let Some(step) = self.uniform_step {
            let pos = z / step;
            let i = (pos as usize).min(n - 1);
            let t = pos - i as f64;
            let j = if i + 1 == n { 0 } else { i + 1 };
            return self.gains[i] + t * (self.gains[j] - self.gains[i]);
        }
        let first = self.angles[0];
        let last = self.angles[n - 1];
        if z < first || z >= last {
            // bracket across the seam
            let span = first + TAU - last;
            let offset = if z >= last { z - last } else { z + TAU - last };
            let t = offset / span;
            return self.gains[n - 1] + t * (self.gains[0] - self.gains[n - 1]);
        }
        let i = self.angles.partition_point(|&a| a <= z) - 1;
        let t = (z - self.angles[i]) / (self.angles[i + 1] - self.angles[i]);
        self.gains[i] + t * (self.gains[i + 1] - self.gains[i])
    }
}

impl Default for GainPattern {
    fn default() -> Self {
        Self::default_synthetic()
    }
}

/// Log-distance path-loss parameters and receiver sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    /// Source level at the reference distance, dBm.
    pub source_dbm: f64,
    /// Reference distance, meters.
    pub reference_distance: f64,
    pub path_loss_exponent: f64,
    /// RSSI noise standard deviation, dB.
    pub sigma_r: f64,
    /// Receiver sensitivity threshold, dBm.
    pub sensitivity_dbm: f64,
    pub frequency_mhz: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            source_dbm: 40.0,
            reference_distance: 1.0,
            path_loss_exponent: 4.0,
            sigma_r: 4.0,
            sensitivity_dbm: -120.0,
            frequency_mhz: 150.0,
        }
    }
}

impl RadioParams {
    /// Noiseless log-distance level at `distance` without antenna gain.
    #[inline]
    pub fn path_level(&self, distance: f64) -> f64 {
        self.source_dbm - 10.0 * self.path_loss_exponent * (distance / self.reference_distance).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssiMeasurement {
    pub tag_id: usize,
    pub value: f64,
    pub timestamp: f64,
    pub uav: UavState,
}

/// Azimuth of the tag in the observer's body frame, `[0, 2π)`.
pub fn relative_azimuth(tag: &Point3, uav: &UavState) -> Result<f64, PropagationError> {
    compass_bearing(&uav.position, tag)
        .map(|b| wrap_angle(b - uav.heading))
        .ok_or(PropagationError::CoincidentPosition)
}

/// Ideal log-distance RSSI including antenna gain.
pub fn ideal_rssi(
    tag: &Point3,
    uav: &UavState,
    params: &RadioParams,
    pattern: &GainPattern,
) -> Result<f64, PropagationError> {
    let d = tag.distance(&uav.position);
    if d <= 0.0 {
        return Err(PropagationError::ZeroDistance);
    }
    // directly overhead the azimuth is undefined; the antenna sees the tag at boresight elevation only
    let gain = match relative_azimuth(tag, uav) {
        Ok(zeta) => pattern.gain_db(zeta),
        Err(_) => pattern.gain_db(0.0),
    };
    Ok(params.path_level(d) + gain)
}

/// Elevation angle of the path seen from the tag, degrees, floored at 0.1°.
pub fn elevation_angle_deg(tag: &Point3, uav: &UavState) -> f64 {
    let dz = (uav.position.z - tag.z).abs();
    let h = tag.horizontal_distance(&uav.position);
    dz.atan2(h).to_degrees().max(0.1)
}

/// Vegetation plus terrain diffraction loss along the tag→UAV path, dB.
pub fn environment_loss(
    tag: &Point3,
    uav: &UavState,
    params: &RadioParams,
    grid: &TerrainGrid,
    vegetation: &VegetationSpec,
) -> Result<f64, PropagationError> {
    let veg = if vegetation.enabled {
        vegetation_loss(params.frequency_mhz, vegetation.depth, elevation_angle_deg(tag, uav))
    } else {
        0.0
    };
    let profile = los_profile(grid, tag, &uav.position, DEFAULT_PROFILE_SAMPLES)?;
    let diffraction = terrain_diffraction_loss(&profile, params.frequency_mhz / 1000.0);
    Ok(veg + diffraction)
}

/// RSSI with vegetation and terrain losses subtracted from the ideal model.
pub fn complex_rssi(
    tag: &Point3,
    uav: &UavState,
    params: &RadioParams,
    pattern: &GainPattern,
    grid: &TerrainGrid,
    vegetation: &VegetationSpec,
) -> Result<f64, PropagationError> {
    Ok(ideal_rssi(tag, uav, params, pattern)? - environment_loss(tag, uav, params, grid, vegetation)?)
}

/// Which model synthesizes the true RSSI.
#[derive(Debug, Clone, Copy)]
pub enum Propagation<'a> {
    Ideal,
    Complex {
        grid: &'a TerrainGrid,
        vegetation: VegetationSpec,
    },
}

impl Propagation<'_> {
    pub fn rssi(
        &self,
        tag: &Point3,
        uav: &UavState,
        params: &RadioParams,
        pattern: &GainPattern,
    ) -> Result<f64, PropagationError> {
        match self {
            Propagation::Ideal => ideal_rssi(tag, uav, params, pattern),
            Propagation::Complex { grid, vegetation } => {
                complex_rssi(tag, uav, params, pattern, grid, vegetation)
            }
        }
    }
}

/// Adds `N(0, σ_R²)` noise and applies the sensitivity threshold. Always
/// consumes exactly one normal draw.
pub fn draw_rssi_measurement<R: Rng + ?Sized>(truth: f64, params: &RadioParams, rng: &mut R) -> Option<f64> {
    let noise: f64 = rng.sample(StandardNormal);
    let value = truth + params.sigma_r * noise;
    (value >= params.sensitivity_dbm).then_some(value)
}

/// Probability that a noisy sample of `level` clears the threshold.
#[inline]
pub fn detection_probability_for_level(level: f64, params: &RadioParams) -> f64 {
    std_normal_sf((params.sensitivity_dbm - level) / params.sigma_r)
}

/// Detection probability averaged over a bias uniform on `[mu_min, mu_max]`
/// added to `level`. Uses the closed form of the integral of the normal CDF.
pub fn interval_detection_probability(level: f64, mu_min: f64, mu_max: f64, params: &RadioParams) -> f64 {
    let width = mu_max - mu_min;
    if width < 1e-9 {
        return detection_probability_for_level(level + 0.5 * (mu_min + mu_max), params);
    }
    let s = params.sigma_r;
    // antiderivative of the standard normal CDF
    let g = |u: f64| u * std_normal_cdf(u) + normal_pdf(u, 0.0, 1.0);
    let lo = (level + mu_min - params.sensitivity_dbm) / s;
    let hi = (level + mu_max - params.sensitivity_dbm) / s;
    (s / width * (g(hi) - g(lo))).clamp(0.0, 1.0)
}

pub fn detection_probability(
    tag: &Point3,
    uav: &UavState,
    params: &RadioParams,
    pattern: &GainPattern,
    propagation: &Propagation<'_>,
) -> Result<f64, PropagationError> {
    Ok(detection_probability_for_level(
        propagation.rssi(tag, uav, params, pattern)?,
        params,
    ))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::stats::std_normal_cdf;

    fn uav(x: f64, y: f64, z: f64, heading: f64) -> UavState {
        UavState::new(Point3::new(x, y, z), heading)
    }

    #[test]
    fn relative_azimuth_conventions() {
        let north = Point3::new(0.0, 100.0, 0.0);
        let east = Point3::new(100.0, 0.0, 0.0);
        assert!(relative_azimuth(&north, &uav(0.0, 0.0, 0.0, 0.0)).unwrap().abs() < 1e-12);
        let z = relative_azimuth(&north, &uav(0.0, 0.0, 0.0, FRAC_PI_2)).unwrap();
        assert!((z - 1.5 * PI).abs() < 1e-12);
        let z = relative_azimuth(&east, &uav(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!((z - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(
            relative_azimuth(&Point3::new(0.0, 0.0, 5.0), &uav(0.0, 0.0, 80.0, 0.0)),
            Err(PropagationError::CoincidentPosition)
        );
    }

    #[test]
    fn default_pattern_shape() {
        let g = GainPattern::default_synthetic();
        assert!((g.gain_db(0.0) - 4.0).abs() < 1e-12);
        assert!((g.gain_db(0.0) - g.gain_db(PI) - 10.0).abs() < 1e-9);
        assert!((g.gain_db(0.3) - g.gain_db(0.3 + TAU)).abs() < 1e-12);
        let max = (0..3600).map(|i| g.gain_db(i as f64 * TAU / 3600.0)).fold(f64::MIN, f64::max);
        assert!((max - 4.0).abs() < 1e-9);
        // local maximum at the back
        assert!(g.gain_db(PI) > g.gain_db(PI - 0.3) && g.gain_db(PI) > g.gain_db(PI + 0.3));
    }

    #[test]
    fn gain_interpolation_and_seam() {
        let g = GainPattern::from_table(vec![0.0, FRAC_PI_2, PI], vec![0.0, -10.0, -20.0]).unwrap();
        assert_eq!(g.gain_db(FRAC_PI_2), -10.0);
        assert!((g.gain_db(FRAC_PI_2 / 2.0) + 5.0).abs() < 1e-12);
        // seam from π to 2π interpolates -20 → 0
        assert!((g.gain_db(1.5 * PI) + 10.0).abs() < 1e-12);
        let text = "# deg dB\n0, 0\n90 -10\n180,-20\n";
        assert_eq!(GainPattern::from_text(text).unwrap().gain_db(1.5 * PI), g.gain_db(1.5 * PI));
        assert!(GainPattern::from_text("0 0\n90\n").is_err());
    }

    #[test]
    fn mirrored_pattern_reverses_azimuth() {
        let g = GainPattern::tabulate(|z| z.sin() + 0.3 * (2.0 * z).cos());
        let m = g.mirrored();
        for z in [0.1, 0.9, 2.5, 4.0] {
            assert!((m.gain_db(z) - g.gain_db(-z)).abs() < 1e-9);
        }
    }

    #[test]
    fn ideal_rssi_reference_distance_and_decade() {
        let p = RadioParams::default();
        let g = GainPattern::cosine(0.0, 10.0);
        let u = uav(0.0, 0.0, 0.0, 0.0);
        let at_ref = ideal_rssi(&Point3::new(0.0, 1.0, 0.0), &u, &p, &g).unwrap();
        assert!((at_ref - 40.0).abs() < 1e-12);
        let decade = ideal_rssi(&Point3::new(0.0, 10.0, 0.0), &u, &p, &g).unwrap();
        assert!((at_ref - decade - 40.0).abs() < 1e-12);
        let turned = ideal_rssi(&Point3::new(3.0, 10.0, 0.0), &uav(0.0, 0.0, 0.0, TAU), &p, &g).unwrap();
        let plain = ideal_rssi(&Point3::new(3.0, 10.0, 0.0), &u, &p, &g).unwrap();
        assert!((turned - plain).abs() < 1e-12);
        assert_eq!(
            ideal_rssi(&Point3::new(0.0, 0.0, 0.0), &u, &p, &g),
            Err(PropagationError::ZeroDistance)
        );
    }

    #[test]
    fn complex_rssi_matches_ideal_without_losses() {
        let grid = TerrainGrid::constant(2000.0, 2000.0, 10.0, 0.0);
        let p = RadioParams::default();
        let g = GainPattern::default();
        let tag = Point3::new(500.0, 600.0, 0.2);
        let u = uav(1200.0, 1500.0, 80.0, 1.0);
        let veg = VegetationSpec { depth: 0.0, enabled: true };
        let ideal = ideal_rssi(&tag, &u, &p, &g).unwrap();
        let complex = complex_rssi(&tag, &u, &p, &g, &grid, &veg).unwrap();
        assert!((ideal - complex).abs() < 1e-12);
    }

    #[test]
    fn ridge_attenuates_by_at_least_grazing_loss() {
        // 60 m ridge running north-south at x = 1000
        let n = 200;
        let cell = 10.0;
        let mut elev = vec![0.0; n * n];
        for row in 0..n {
            for col in 0..n {
                let x = (col as f64 + 0.5) * cell;
                elev[row * n + col] = 60.0 * (-0.5 * ((x - 1000.0) / 30.0).powi(2)).exp();
            }
        }
        let grid = TerrainGrid::new(n, n, cell, (0.0, 0.0), elev, -9999.0).unwrap();
        let p = RadioParams::default();
        let g = GainPattern::default();
        let veg = VegetationSpec { depth: 0.0, enabled: false };
        let tag = Point3::new(700.0, 1000.0, 0.2);
        let u = uav(1400.0, 1000.0, 40.0, 0.0);
        let ideal = ideal_rssi(&tag, &u, &p, &g).unwrap();
        let complex = complex_rssi(&tag, &u, &p, &g, &grid, &veg).unwrap();
        assert!(ideal - complex >= 10.0, "loss {}", ideal - complex);
    }

    #[test]
    fn detection_probability_reference_points() {
        let p = RadioParams::default();
        assert!((detection_probability_for_level(-120.0, &p) - 0.5).abs() < 1e-15);
        let v = detection_probability_for_level(-120.0 + 4.0 * p.sigma_r, &p);
        assert!((v - std_normal_cdf(4.0)).abs() < 1e-15);
        assert!((v - 0.999_968_33).abs() < 1e-8);
    }

    #[test]
    fn noisy_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = RadioParams::default();
        let hits = (0..10_000)
            .filter(|_| draw_rssi_measurement(-120.0, &p, &mut rng).is_some())
            .count();
        assert!((hits as f64 / 1e4 - 0.5).abs() < 0.01 * 2.0);
        let high = -120.0 + 10.0 * p.sigma_r;
        assert!((0..10_000).all(|_| draw_rssi_measurement(high, &p, &mut rng).is_some()));
        let quiet = RadioParams { sigma_r: 0.0, ..p };
        assert_eq!(draw_rssi_measurement(-80.0, &quiet, &mut rng), Some(-80.0));
    }

    #[test]
    fn interval_detection_matches_midpoint_rule() {
        let p = RadioParams::default();
        for &(level, lo, hi) in &[(-110.0, -20.0, 8.0), (-90.0, -50.0, 15.0), (-125.0, -5.0, 1.0), (-60.0, -5.0, 1.0)] {
            let n = 20_000;
            let step = (hi - lo) / n as f64;
            let avg = (0..n)
                .map(|i| detection_probability_for_level(level + lo + (i as f64 + 0.5) * step, &p))
                .sum::<f64>()
                / n as f64;
            let closed = interval_detection_probability(level, lo, hi, &p);
            assert!((closed - avg).abs() < 1e-7, "{level} {closed} {avg}");
        }
        assert_eq!(
            interval_detection_probability(-118.0, -2.0, -2.0, &p),
            detection_probability_for_level(-120.0, &p)
        );
    }
}
