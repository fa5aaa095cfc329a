use serde::Serialize;

use super::mission::{MissionResult, Scenario, ScenarioError};

/// Mean, median and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl Stats {
    /// `None` for an empty sample. Single samples report `std = 0`.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { n, mean, median, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub completed: usize,
    /// Time until every tag was localized (or the cap), per mission.
    pub mission_time_s: Option<Stats>,
    /// Per-tag localization times pooled over missions; unlocalized tags excluded.
    pub tag_time_s: Option<Stats>,
    /// Per-mission mean of per-tag errors.
    pub mission_error_m: Option<Stats>,
    /// Per-tag errors pooled over missions.
    pub tag_error_m: Option<Stats>,
    pub aoa_fraction: Option<Stats>,
    pub silent_violations: usize,
    pub fallbacks: usize,
}

impl MonteCarloSummary {
    pub fn from_results(results: &[MissionResult]) -> Self {
        let mission_time: Vec<f64> = results.iter().map(|r| r.total_time_s as f64).collect();
        let tag_time: Vec<f64> = results
            .iter()
            .flat_map(|r| r.tags.iter().filter_map(|t| t.loc_time_s.map(f64::from)))
            .collect();
        let mission_error: Vec<f64> = results.iter().filter_map(|r| r.mean_error()).collect();
        let tag_error: Vec<f64> = results.iter().flat_map(|r| r.tags.iter().map(|t| t.error_m)).collect();
        let aoa: Vec<f64> = results.iter().map(|r| r.aoa_fraction()).collect();
        Self {
            trials: results.len(),
            completed: results.iter().filter(|r| r.completed).count(),
            mission_time_s: Stats::of(&mission_time),
            tag_time_s: Stats::of(&tag_time),
            mission_error_m: Stats::of(&mission_error),
            tag_error_m: Stats::of(&tag_error),
            aoa_fraction: Stats::of(&aoa),
            silent_violations: results.iter().map(|r| r.silent_violations()).sum(),
            fallbacks: results
                .iter()
                .map(|r| r.decisions.iter().filter(|d| d.fallback).count())
                .sum(),
        }
    }
}

/// Seed of trial `index`: `base_seed + index`.
pub fn trial_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}

/// Runs `n_trials` sequential missions seeded `base_seed + i`.
pub fn run_monte_carlo(
    scenario: &Scenario,
    n_trials: usize,
    base_seed: u64,
) -> Result<(Vec<MissionResult>, MonteCarloSummary), ScenarioError> {
    let results = (0..n_trials)
        .map(|i| scenario.run_mission(trial_seed(base_seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = MonteCarloSummary::from_results(&results);
    Ok((results, summary))
}
