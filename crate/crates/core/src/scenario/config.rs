use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bearing::BearingConfig;
use crate::bernoulli::DynamicsModel;
use crate::planner::{PlannerConfig, RewardKind};
use crate::propagation::RadioParams;
use crate::terrain::{TerrainKind, VegetationSpec};

/// A failed range or consistency check, naming the offending key.
#[derive(Debug, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerrainSource {
    Synthetic {
        class: TerrainKind,
        /// Max − min elevation; the class default when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relief: Option<f64>,
        #[serde(default = "default_terrain_seed")]
        seed: u64,
    },
    /// Plain-text elevation grid. Relative paths are resolved by the caller.
    File {
        path: PathBuf,
        /// Class used for class-dependent defaults such as the imprecision interval.
        class: TerrainKind,
    },
}

fn default_terrain_seed() -> u64 {
    1
}

impl Default for TerrainSource {
    fn default() -> Self {
        TerrainSource::Synthetic {
            class: TerrainKind::Flat,
            relief: None,
            seed: default_terrain_seed(),
        }
    }
}

impl TerrainSource {
    pub fn class(&self) -> TerrainKind {
        match self {
            TerrainSource::Synthetic { class, .. } | TerrainSource::File { class, .. } => *class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AntennaSource {
    #[default]
    TwoLobe,
    Cosine { max_gain_db: f64, front_to_back_db: f64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PropagationKind {
    #[default]
    Complex,
    Ideal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mobility {
    Static,
    #[default]
    Wandering,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TagConfig {
    pub count: usize,
    pub mobility: Mobility,
    /// Tags spawn at least this far inside the area boundary, meters.
    pub margin: f64,
    /// Height above ground, meters.
    pub height: f64,
}

impl Default for TagConfig {
    fn default() -> Self {
        Self {
            count: 20,
            mobility: Mobility::Wandering,
            margin: 50.0,
            height: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavConfig {
    /// Start position `[x, y]`, meters.
    pub start: [f64; 2],
    /// Flight altitude above the ground at the start position, meters.
    pub altitude: f64,
    pub heading: f64,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            start: [1.0, 1.0],
            altitude: 80.0,
            heading: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Where the filter evaluates the RSSI detection probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectionLevel {
    /// Threshold probability averaged over the imprecision interval.
    #[default]
    Averaged,
    /// Ideal level shifted to the centre of the imprecision interval.
    Midpoint,
    /// Ideal level, no shift.
    Ideal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub particles: usize,
    pub initial_r: f64,
    pub dynamics: DynamicsModel,
    /// Localization threshold on the xy covariance determinant, m⁴.
    pub n_th: f64,
    pub clutter_lambda: f64,
    pub rssi_clutter_range: [f64; 2],
    /// `[μ_min, μ_max]`, dB; the terrain-class default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imprecision: Option<[f64; 2]>,
    /// Noise assumed by precise-likelihood methods, dB.
    pub precise_sigma: f64,
    pub sigma_a: f64,
    pub detection_level: DetectionLevel,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 3000,
            initial_r: 0.5,
            dynamics: DynamicsModel::default(),
            n_th: 2e4,
            clutter_lambda: 0.05,
            rssi_clutter_range: [-120.0, 0.0],
            imprecision: None,
            precise_sigma: 8.0,
            sigma_a: 0.095,
            detection_level: DetectionLevel::Averaged,
        }
    }
}

/// Default imprecision interval per terrain class, dB.
pub fn default_imprecision(class: TerrainKind) -> [f64; 2] {
    match class {
        TerrainKind::Flat => [-5.0, 1.0],
        TerrainKind::Hilly => [-20.0, 8.0],
        TerrainKind::Mountain => [-50.0, 15.0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    #[default]
    Metap,
    ImpRssi,
    #[serde(rename = "caoa20")]
    CAoA20,
    #[serde(rename = "aoa_rssi20")]
    AoaRssi20,
    #[serde(rename = "aoa_rssi45")]
    AoaRssi45,
    PfBaseline,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Metap,
        MethodKind::ImpRssi,
        MethodKind::CAoA20,
        MethodKind::AoaRssi20,
        MethodKind::AoaRssi45,
        MethodKind::PfBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Metap => "metap",
            MethodKind::ImpRssi => "imp_rssi",
            MethodKind::CAoA20 => "caoa20",
            MethodKind::AoaRssi20 => "aoa_rssi20",
            MethodKind::AoaRssi45 => "aoa_rssi45",
            MethodKind::PfBaseline => "pf_baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub terrain: TerrainSource,
    /// Side of the square search area `[0, extent]²`, meters.
    pub extent: f64,
    pub tags: TagConfig,
    pub radio: RadioParams,
    pub vegetation: VegetationSpec,
    pub antenna: AntennaSource,
    pub propagation: PropagationKind,
    pub filter: FilterConfig,
    pub planner: PlannerConfig,
    pub bearing: BearingConfig,
    pub method: MethodKind,
    pub uav: UavConfig,
    /// Pins the per-scan detection probability, bypassing the threshold model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forced_pd: Option<f64>,
    pub time_cap_s: u32,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            terrain: TerrainSource::default(),
            extent: 2000.0,
            tags: TagConfig::default(),
            radio: RadioParams::default(),
            vegetation: VegetationSpec::default(),
            antenna: AntennaSource::default(),
            propagation: PropagationKind::default(),
            filter: FilterConfig::default(),
            planner: PlannerConfig::default(),
            bearing: BearingConfig::default(),
            method: MethodKind::default(),
            uav: UavConfig::default(),
            forced_pd: None,
            time_cap_s: 3600,
            trials: 1,
            seed: 0,
        }
    }
}

fn check(ok: bool, path: &str, message: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(path, message))
    }
}

fn positive(v: f64, path: &str) -> Result<(), ConfigError> {
    check(v > 0.0 && v.is_finite(), path, &format!("must be positive and finite, got {v}"))
}

fn probability(v: f64, path: &str) -> Result<(), ConfigError> {
    check((0.0..=1.0).contains(&v), path, &format!("must lie in [0, 1], got {v}"))
}

impl ScenarioConfig {
    pub fn imprecision(&self) -> [f64; 2] {
        self.filter
            .imprecision
            .unwrap_or_else(|| default_imprecision(self.terrain.class()))
    }

    /// Planner horizon and rotation time used by this config's method.
    pub fn effective_planner(&self) -> PlannerConfig {
        let mut p = self.planner;
        if self.method == MethodKind::AoaRssi45 {
            p.rotation_s = 45;
            p.horizon_s = p.travel_s + 45;
        }
        p
    }

    /// Range and consistency checks. File existence is checked when the
    /// scenario is prepared.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let TerrainSource::Synthetic { relief: Some(r), .. } = self.terrain {
            check(r >= 0.0 && r.is_finite(), "terrain.relief", "must be non-negative")?;
        }
        positive(self.extent, "extent")?;
        check(
            self.tags.margin >= 0.0 && 2.0 * self.tags.margin < self.extent,
            "tags.margin",
            "must be non-negative and leave room inside the area",
        )?;
        check(self.tags.height >= 0.0, "tags.height", "must be non-negative")?;

        let r = &self.radio;
        positive(r.reference_distance, "radio.reference_distance")?;
        positive(r.path_loss_exponent, "radio.path_loss_exponent")?;
        positive(r.sigma_r, "radio.sigma_r")?;
        positive(r.frequency_mhz, "radio.frequency_mhz")?;
        check(r.source_dbm.is_finite(), "radio.source_dbm", "must be finite")?;
        check(r.sensitivity_dbm.is_finite(), "radio.sensitivity_dbm", "must be finite")?;
        check(self.vegetation.depth >= 0.0, "vegetation.depth", "must be non-negative")?;

        if let AntennaSource::Cosine { front_to_back_db, .. } = self.antenna {
            check(front_to_back_db >= 0.0, "antenna.front_to_back_db", "must be non-negative")?;
        }

        let f = &self.filter;
        check(f.particles >= 10, "filter.particles", "must be at least 10")?;
        probability(f.initial_r, "filter.initial_r")?;
        probability(f.dynamics.survival, "filter.dynamics.survival")?;
        probability(f.dynamics.birth, "filter.dynamics.birth")?;
        check(
            f.dynamics.process_variance.iter().all(|v| *v >= 0.0),
            "filter.dynamics.process_variance",
            "must be non-negative",
        )?;
        positive(f.n_th, "filter.n_th")?;
        check(f.clutter_lambda >= 0.0, "filter.clutter_lambda", "must be non-negative")?;
        check(
            f.rssi_clutter_range[0] < f.rssi_clutter_range[1],
            "filter.rssi_clutter_range",
            "lower bound must be below upper bound",
        )?;
        if let Some([lo, hi]) = f.imprecision {
            check(lo <= hi, "filter.imprecision", "μ_min must not exceed μ_max")?;
        }
        positive(f.precise_sigma, "filter.precise_sigma")?;
        positive(f.sigma_a, "filter.sigma_a")?;

        let p = &self.planner;
        check(p.n_headings >= 2, "planner.n_headings", "must be at least 2")?;
        check(
            p.travel_s + p.rotation_s == p.horizon_s,
            "planner.horizon_s",
            "must equal travel_s + rotation_s",
        )?;
        check(p.horizon_s > 0, "planner.horizon_s", "must be positive")?;
        positive(p.speed, "planner.speed")?;
        positive(p.rotation_rate, "planner.rotation_rate")?;
        check(p.planning_particles >= 10, "planner.planning_particles", "must be at least 10")?;
        positive(p.histogram_cell, "planner.histogram_cell")?;
        positive(p.void.radius, "planner.void.radius")?;
        probability(p.void.threshold, "planner.void.threshold")?;
        if let RewardKind::Renyi { alpha } = p.reward {
            check(alpha >= 0.0 && alpha != 1.0, "planner.reward.alpha", "must be non-negative and not 1")?;
        }

        positive(self.bearing.grid_step_deg, "bearing.grid_step_deg")?;
        positive(self.bearing.threshold_rad, "bearing.threshold_rad")?;

        let [x, y] = self.uav.start;
        check(
            (0.0..=self.extent).contains(&x) && (0.0..=self.extent).contains(&y),
            "uav.start",
            "must lie inside the search area",
        )?;
        positive(self.uav.altitude, "uav.altitude")?;
        if let Some(pd) = self.forced_pd {
            probability(pd, "forced_pd")?;
        }
        check(self.time_cap_s > 0, "time_cap_s", "must be positive")?;
        check(self.trials >= 1, "trials", "must be at least 1")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn range_errors_name_the_key() {
        let mut c = ScenarioConfig::default();
        c.radio.sigma_r = -1.0;
        assert_eq!(c.validate().unwrap_err().path, "radio.sigma_r");
        let mut c = ScenarioConfig::default();
        c.planner.rotation_s = 25;
        assert_eq!(c.validate().unwrap_err().path, "planner.horizon_s");
    }

    #[test]
    fn method_45_extends_horizon() {
        let c = ScenarioConfig {
            method: MethodKind::AoaRssi45,
            ..Default::default()
        };
        let p = c.effective_planner();
        assert_eq!((p.travel_s, p.rotation_s, p.horizon_s), (10, 45, 55));
    }
}
