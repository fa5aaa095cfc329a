use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wildtrack_core::bearing::{
    fraction_above, median, read_rotation_logs, run_detector_study, AoaDetector, DetectorStudy, RotationSynth,
};
use wildtrack_core::propagation::GainPattern;

use crate::{io_error, CliError};

/// Bearings for every tag in a logged rotation, in degrees clockwise from north.
pub fn bearings_from_log<W: Write>(
    log_path: &Path,
    expected_pulses: usize,
    detector: &AoaDetector,
    out: W,
) -> Result<usize, CliError> {
    let file = fs::File::open(log_path).map_err(io_error(log_path))?;
    let logs = read_rotation_logs(file, expected_pulses)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tag_id",
        "detections",
        "detection_fraction",
        "corr_coef_deg",
        "cross_corr_deg",
        "compensated_deg",
        "status",
    ])?;
    for (id, log) in &logs {
        let k = log.pulses.len();
        let head = [id.to_string(), k.to_string(), log.detection_fraction().to_string()];
        let min = detector.config().min_detections;
        let (bearings, status) = if k < min {
            (None, format!("too few detections (need {min})"))
        } else {
            match detector.bearings(log) {
                Ok(b) => (Some(b), "ok".to_string()),
                Err(e) => (None, e.to_string()),
            }
        };
        let deg = |f: fn(&wildtrack_core::bearing::DetectorBearings) -> f64| {
            bearings.as_ref().map(|b| f(b).to_degrees().to_string()).unwrap_or_default()
        };
        let row = [
            deg(|b| b.corr_coef),
            deg(|b| b.cross_corr),
            deg(|b| b.compensated),
            status,
        ];
        w.write_record(head.iter().chain(row.iter()))?;
    }
    w.flush().map_err(io_error(log_path))?;
    Ok(logs.len())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetectorSummary {
    pub fraction_above_90deg: f64,
    pub median_error_deg: Option<f64>,
}

impl DetectorSummary {
    fn of(errors: &[f64]) -> Self {
        Self {
            fraction_above_90deg: fraction_above(errors, std::f64::consts::FRAC_PI_2),
            median_error_deg: median(errors).map(f64::to_degrees),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub trials: usize,
    pub rejected: usize,
    pub seed: u64,
    pub synth: RotationSynth,
    pub corr_coef: DetectorSummary,
    pub cross_corr: DetectorSummary,
    pub compensated: DetectorSummary,
}

pub fn synthetic_study(
    pattern: &GainPattern,
    detector: &AoaDetector,
    synth: &RotationSynth,
    trials: usize,
    seed: u64,
) -> (DetectorStudy, StudySummary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let study = run_detector_study(detector, pattern, synth, trials, &mut rng);
    let summary = StudySummary {
        trials,
        rejected: study.rejected,
        seed,
        synth: *synth,
        corr_coef: DetectorSummary::of(&study.corr_coef),
        cross_corr: DetectorSummary::of(&study.cross_corr),
        compensated: DetectorSummary::of(&study.compensated),
    };
    (study, summary)
}

/// Per-rotation absolute errors in degrees, one column per detector.
pub fn write_study_errors<W: Write>(out: W, study: &DetectorStudy) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rotation", "corr_coef_deg", "cross_corr_deg", "compensated_deg"])?;
    for (i, ((a, b), c)) in study
        .corr_coef
        .iter()
        .zip(&study.cross_corr)
        .zip(&study.compensated)
        .enumerate()
    {
        w.write_record([
            i.to_string(),
            a.to_degrees().to_string(),
            b.to_degrees().to_string(),
            c.to_degrees().to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}
