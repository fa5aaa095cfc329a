//! Rotation-based angle-of-arrival detection.
//!
//! The raw detectors search for the offset `α` that best aligns the logged
//! RSSI with `G(θ_i + α)`. With body-frame azimuth `ζ = β − θ`, the physical
//! bearing is recovered by running them against the mirrored pattern and
//! negating the offset; [`measure_aoa`] does that.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Read;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{circular_distance, wrap_angle};
use crate::propagation::GainPattern;

#[derive(Debug, Error)]
pub enum BearingError {
    #[error("not enough detections: {found} (need {needed})")]
    TooFewDetections { found: usize, needed: usize },
    #[error("logged RSSI has zero variance")]
    ZeroVariance,
    #[error("rotation log csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("rotation log row {row}: {message}")]
    InvalidRow { row: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub rssi_dbm: f64,
    pub heading: f64,
}

/// Detected pulses from one rotation for a single tag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RotationLog {
    pub tag_id: usize,
    pub pulses: Vec<Pulse>,
    pub duration_s: f64,
    pub expected_pulses: usize,
}

impl RotationLog {
    pub fn new(tag_id: usize, duration_s: f64, expected_pulses: usize) -> Self {
        Self {
            tag_id,
            pulses: Vec::new(),
            duration_s,
            expected_pulses,
        }
    }

    pub fn push(&mut self, rssi_dbm: f64, heading: f64) {
        self.pulses.push(Pulse {
            rssi_dbm,
            heading: wrap_angle(heading),
        });
    }

    pub fn detection_fraction(&self) -> f64 {
        if self.expected_pulses == 0 {
            return 0.0;
        }
        (self.pulses.len() as f64 / self.expected_pulses as f64).min(1.0)
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    timestamp: f64,
    tag_id: usize,
    rssi_dbm: f64,
    heading_rad: f64,
}

/// Reads `timestamp,tag_id,rssi_dbm,heading_rad` rows into one log per tag.
/// Duration is the timestamp span; `expected_pulses` is applied to every log.
pub fn read_rotation_logs<R: Read>(
    reader: R,
    expected_pulses: usize,
) -> Result<BTreeMap<usize, RotationLog>, BearingError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut spans: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut logs: BTreeMap<usize, RotationLog> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        if !row.rssi_dbm.is_finite() || !row.heading_rad.is_finite() || !row.timestamp.is_finite() {
            return Err(BearingError::InvalidRow {
                row: i + 1,
                message: "non-finite value".into(),
            });
        }
        let log = logs
            .entry(row.tag_id)
            .or_insert_with(|| RotationLog::new(row.tag_id, 0.0, expected_pulses));
        log.push(row.rssi_dbm, row.heading_rad);
        let span = spans.entry(row.tag_id).or_insert((row.timestamp, row.timestamp));
        span.0 = span.0.min(row.timestamp);
        span.1 = span.1.max(row.timestamp);
    }
    for (id, log) in logs.iter_mut() {
        let (lo, hi) = spans[id];
        log.duration_s = hi - lo;
    }
    Ok(logs)
}

/// Candidate offsets `0, step, 2·step, …` covering `[0, 2π)`.
pub fn alpha_grid(step_deg: f64) -> Vec<f64> {
    let n = (360.0 / step_deg).round().max(1.0) as usize;
    (0..n).map(|i| i as f64 * TAU / n as f64).collect()
}

fn template(pulses: &[Pulse], pattern: &GainPattern, alpha: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(pulses.iter().map(|p| pattern.gain_db(p.heading + alpha)));
}

/// Offset maximizing the Pearson correlation between logged RSSI (dB) and
/// `G(θ_i + α)`. Ties keep the first candidate.
pub fn corr_coef_aoa(log: &RotationLog, pattern: &GainPattern, alphas: &[f64]) -> Result<f64, BearingError> {
    let k = log.pulses.len();
    if k < 2 {
        return Err(BearingError::TooFewDetections { found: k, needed: 2 });
    }
    let mean_z = log.pulses.iter().map(|p| p.rssi_dbm).sum::<f64>() / k as f64;
    let zc: Vec<f64> = log.pulses.iter().map(|p| p.rssi_dbm - mean_z).collect();
    let zz: f64 = zc.iter().map(|v| v * v).sum();
    if zz <= 0.0 {
        return Err(BearingError::ZeroVariance);
    }
    let mut best = (f64::NEG_INFINITY, alphas[0]);
    let mut t = Vec::with_capacity(k);
    for &alpha in alphas {
        template(&log.pulses, pattern, alpha, &mut t);
        let mean_t = t.iter().sum::<f64>() / k as f64;
        let (mut cov, mut tt) = (0.0, 0.0);
        for (ti, zi) in t.iter().zip(&zc) {
            let d = ti - mean_t;
            cov += d * zi;
            tt += d * d;
        }
        if tt <= 0.0 {
            continue;
        }
        let rho = cov / (tt * zz).sqrt();
        if rho > best.0 {
            best = (rho, alpha);
        }
    }
    Ok(best.1)
}

/// Offset maximizing `Σ 10^(z_i/10)·G(θ_i + α)`, so the strongest pulses
/// pull the front lobe toward them.
pub fn cross_corr_aoa(log: &RotationLog, pattern: &GainPattern, alphas: &[f64]) -> Result<f64, BearingError> {
    if log.pulses.is_empty() {
        return Err(BearingError::TooFewDetections { found: 0, needed: 1 });
    }
    // scale by the strongest pulse to stay clear of overflow and underflow
    let zmax = log.pulses.iter().map(|p| p.rssi_dbm).fold(f64::NEG_INFINITY, f64::max);
    let power: Vec<f64> = log
        .pulses
        .iter()
        .map(|p| 10f64.powf((p.rssi_dbm - zmax) / 10.0))
        .collect();
    let mut best = (f64::NEG_INFINITY, alphas[0]);
    for &alpha in alphas {
        let score: f64 = log
            .pulses
            .iter()
            .zip(&power)
            .map(|(p, w)| w * pattern.gain_db(p.heading + alpha))
            .sum();
        if score > best.0 {
            best = (score, alpha);
        }
    }
    Ok(best.1)
}

/// Keeps `z1` when the two detectors agree within `threshold`, otherwise
/// flips it by π.
pub fn compensated_aoa(z1: f64, z2: f64, threshold: f64) -> f64 {
    if circular_distance(z1, z2) < threshold {
        wrap_angle(z1)
    } else {
        wrap_angle(z1 - PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BearingConfig {
    pub grid_step_deg: f64,
    pub threshold_rad: f64,
    pub min_detections: usize,
}

impl Default for BearingConfig {
    fn default() -> Self {
        Self {
            grid_step_deg: 1.0,
            threshold_rad: FRAC_PI_2,
            min_detections: 8,
        }
    }
}

/// Absolute bearing from the UAV toward a tag, clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaMeasurement {
    pub tag_id: usize,
    pub angle: f64,
    pub detection_fraction: f64,
    pub timestamp: f64,
}

/// Per-detector bearings for one rotation, already in the absolute frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorBearings {
    pub corr_coef: f64,
    pub cross_corr: f64,
    pub compensated: f64,
}

/// Runs both detectors against the mirrored pattern and converts the
/// offsets into absolute bearings.
pub fn detector_bearings(
    log: &RotationLog,
    mirrored: &GainPattern,
    alphas: &[f64],
    threshold: f64,
) -> Result<DetectorBearings, BearingError> {
    let corr_coef = wrap_angle(-corr_coef_aoa(log, mirrored, alphas)?);
    let cross_corr = wrap_angle(-cross_corr_aoa(log, mirrored, alphas)?);
    Ok(DetectorBearings {
        corr_coef,
        cross_corr,
        compensated: compensated_aoa(corr_coef, cross_corr, threshold),
    })
}

/// Precomputed state for repeated AoA measurements with one antenna.
#[derive(Debug, Clone)]
pub struct AoaDetector {
    mirrored: GainPattern,
    alphas: Vec<f64>,
    config: BearingConfig,
}

impl AoaDetector {
    pub fn new(pattern: &GainPattern, config: BearingConfig) -> Self {
        Self {
            mirrored: pattern.mirrored(),
            alphas: alpha_grid(config.grid_step_deg),
            config,
        }
    }

    pub fn config(&self) -> &BearingConfig {
        &self.config
    }

    pub fn bearings(&self, log: &RotationLog) -> Result<DetectorBearings, BearingError> {
        detector_bearings(log, &self.mirrored, &self.alphas, self.config.threshold_rad)
    }

    pub fn measure(&self, log: &RotationLog, timestamp: f64) -> Result<AoaMeasurement, BearingError> {
        let k = log.pulses.len();
        if k < self.config.min_detections {
            return Err(BearingError::TooFewDetections {
                found: k,
                needed: self.config.min_detections,
            });
        }
        let b = self.bearings(log)?;
        Ok(AoaMeasurement {
            tag_id: log.tag_id,
            angle: b.compensated,
            detection_fraction: log.detection_fraction(),
            timestamp,
        })
    }
}

/// One-shot convenience over [`AoaDetector`].
pub fn measure_aoa(
    log: &RotationLog,
    pattern: &GainPattern,
    config: &BearingConfig,
    timestamp: f64,
) -> Result<AoaMeasurement, BearingError> {
    AoaDetector::new(pattern, *config).measure(log, timestamp)
}

/// Synthetic rotation for offline detector studies. Pulses are evenly spaced
/// over one turn and only the strongest `detection_rate · pulses` noisy
/// levels are kept, as a receiver threshold would for a distant tag: mostly
/// front-lobe pulses, with back-lobe pulses that noise lifted over the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotationSynth {
    pub pulses: usize,
    pub detection_rate: f64,
    pub sigma_db: f64,
    pub level_dbm: f64,
    pub duration_s: f64,
}

impl Default for RotationSynth {
    fn default() -> Self {
        Self {
            pulses: 90,
            detection_rate: 0.3,
            sigma_db: 4.0,
            level_dbm: -110.0,
            duration_s: 20.0,
        }
    }
}

pub fn synthesize_rotation<R: Rng + ?Sized>(
    pattern: &GainPattern,
    bearing: f64,
    synth: &RotationSynth,
    rng: &mut R,
) -> RotationLog {
    let n = synth.pulses;
    let start = rng.random_range(0.0..TAU);
    let keep = ((synth.detection_rate * n as f64).round() as usize).min(n);
    let mut pulses: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let heading = wrap_angle(start + i as f64 * TAU / n as f64);
            let noise: f64 = rng.sample(StandardNormal);
            (synth.level_dbm + pattern.gain_db(bearing - heading) + synth.sigma_db * noise, heading)
        })
        .collect();
    pulses.sort_by(|a, b| b.0.total_cmp(&a.0));
    pulses.truncate(keep);
    pulses.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut log = RotationLog::new(0, synth.duration_s, n);
    for (z, heading) in pulses {
        log.push(z, heading);
    }
    log
}

/// Absolute bearing errors of each detector over a batch of rotations, in
/// radians. Rotations the detectors reject are counted in `rejected`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DetectorStudy {
    pub corr_coef: Vec<f64>,
    pub cross_corr: Vec<f64>,
    pub compensated: Vec<f64>,
    pub rejected: usize,
}

impl DetectorStudy {
    pub fn push(&mut self, bearings: &DetectorBearings, truth: f64) {
        self.corr_coef.push(circular_distance(bearings.corr_coef, truth));
        self.cross_corr.push(circular_distance(bearings.cross_corr, truth));
        self.compensated.push(circular_distance(bearings.compensated, truth));
    }
}

/// Share of `errors` strictly above `limit`.
pub fn fraction_above(errors: &[f64], limit: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    errors.iter().filter(|&&e| e > limit).count() as f64 / errors.len() as f64
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Runs `trials` synthetic rotations at uniformly random bearings.
pub fn run_detector_study<R: Rng + ?Sized>(
    detector: &AoaDetector,
    pattern: &GainPattern,
    synth: &RotationSynth,
    trials: usize,
    rng: &mut R,
) -> DetectorStudy {
    let mut study = DetectorStudy::default();
    for _ in 0..trials {
        let truth = rng.random_range(0.0..TAU);
        let log = synthesize_rotation(pattern, truth, synth, rng);
        if log.pulses.len() < detector.config().min_detections {
            study.rejected += 1;
            continue;
        }
        match detector.bearings(&log) {
            Ok(b) => study.push(&b, truth),
            Err(_) => study.rejected += 1,
        }
    }
    study
}
