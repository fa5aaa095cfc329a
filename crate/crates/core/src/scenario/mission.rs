use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::bearing::{AoaDetector, RotationLog};
use crate::bernoulli::{
    estimate, predict, resample_if_needed, update, AoaModel, BernoulliBelief, ClutterModel, DetectionModel,
    DynamicsModel, MeasurementModel, RssiLikelihood, RssiModel, UniformBirth,
};
use crate::geometry::{Point3, SearchArea, UavState};
use crate::planner::{
    check_planned_trajectory, min_void_margin, plan, ActionKind, ActionSet, PlannerConfig, RolloutModels, Track,
};
use crate::propagation::{draw_rssi_measurement, GainPattern, Propagation, PropagationError};
use crate::terrain::{generate_synthetic_terrain, load_dem, TerrainError, TerrainGrid};

use super::config::{
    AntennaSource, ConfigError, DetectionLevel, MethodKind, PropagationKind, ScenarioConfig, TerrainSource,
};
use super::kinematics::{ground_at, step_object, step_uav, TagTruth};
use super::pf::{pf_baseline_update, PfOutcome};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn read(path: &PathBuf) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.clone(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TagResult {
    pub id: usize,
    /// Seconds from mission start; `None` if the time cap hit first.
    pub loc_time_s: Option<u32>,
    /// Horizontal distance between estimate and truth at localization, or at
    /// mission end for tags never localized.
    pub error_m: f64,
    pub det_m4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRecord {
    pub t: u32,
    pub target_id: usize,
    pub kind: ActionKind,
    pub heading: f64,
    pub reward: f64,
    pub fallback: bool,
    /// Independent re-check of the executed trajectory against the beliefs
    /// in scope when the action was chosen.
    pub recheck_ok: bool,
    pub pruned: usize,
    pub candidates: usize,
}

impl DecisionRecord {
    pub fn silent_violation(&self) -> bool {
        !self.recheck_ok && !self.fallback
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: u32,
    pub uav_x: f64,
    pub uav_y: f64,
    pub uav_z: f64,
    pub heading: f64,
    pub tag_id: usize,
    pub true_x: f64,
    pub true_y: f64,
    pub r: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub det_m4: f64,
    pub localized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionResult {
    pub seed: u64,
    pub method: MethodKind,
    pub total_time_s: u32,
    /// Every tag localized before the time cap.
    pub completed: bool,
    pub tags: Vec<TagResult>,
    pub decisions: Vec<DecisionRecord>,
    /// Per second: smallest void probability minus threshold over the
    /// unlocalized beliefs at the UAV's position.
    pub void_margin_trace: Vec<f64>,
    pub clipped_steps: u32,
    pub clamped_updates: u32,
    pub pf_reinitializations: u32,
    pub aoa_measurements: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRow>>,
}

impl MissionResult {
    pub fn aoa_fraction(&self) -> f64 {
        if self.decisions.is_empty() {
            return 0.0;
        }
        let n = self.decisions.iter().filter(|d| d.kind == ActionKind::Aoa).count();
        n as f64 / self.decisions.len() as f64
    }

    pub fn silent_violations(&self) -> usize {
        self.decisions.iter().filter(|d| d.silent_violation()).count()
    }

    pub fn mean_error(&self) -> Option<f64> {
        if self.tags.is_empty() {
            return None;
        }
        Some(self.tags.iter().map(|t| t.error_m).sum::<f64>() / self.tags.len() as f64)
    }
}

/// How a method filters and which actions it may take.
#[derive(Debug, Clone, Copy)]
struct MethodProfile {
    actions: ActionSet,
    rssi: Option<RssiLikelihood>,
    aoa: bool,
    particle_filter: bool,
}

/// Loaded terrain and antenna plus the validated config, shared by trials.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: TerrainGrid,
    pub pattern: GainPattern,
    pub area: SearchArea,
    planner: PlannerConfig,
    detector: AoaDetector,
}

pub fn load_pattern(source: &AntennaSource) -> Result<GainPattern, ScenarioError> {
    Ok(match source {
        AntennaSource::TwoLobe => GainPattern::default_synthetic(),
        AntennaSource::Cosine {
            max_gain_db,
            front_to_back_db,
        } => GainPattern::cosine(*max_gain_db, *front_to_back_db),
        AntennaSource::File { path } => GainPattern::from_text(&read(path)?)?,
    })
}

impl Scenario {
    pub fn prepare(config: &ScenarioConfig) -> Result<Self, ScenarioError> {
        config.validate()?;
        let area = SearchArea::square(config.extent);
        let grid = match &config.terrain {
            TerrainSource::Synthetic { class, relief, seed } => {
                generate_synthetic_terrain(*class, config.extent, relief.unwrap_or(class.default_relief()), *seed)?
            }
            TerrainSource::File { path, .. } => load_dem(&read(path)?)?,
        };
        let (x0, y0, x1, y1) = grid.extent();
        if x0 > area.min_x || y0 > area.min_y || x1 < area.max_x || y1 < area.max_y {
            return Err(ConfigError::new("terrain", "grid does not cover the search area").into());
        }
        let pattern = load_pattern(&config.antenna)?;
        Ok(Self {
            detector: AoaDetector::new(&pattern, config.bearing),
            planner: config.effective_planner(),
            config: config.clone(),
            grid,
            pattern,
            area,
        })
    }

    fn profile(&self) -> MethodProfile {
        let c = &self.config;
        let [mu_min, mu_max] = c.imprecision();
        let imprecise = RssiLikelihood::Imprecise {
            sigma: c.radio.sigma_r,
            mu_min,
            mu_max,
        };
        let precise = RssiLikelihood::Precise {
            sigma: c.filter.precise_sigma,
        };
        let (actions, rssi, aoa, particle_filter) = match c.method {
            MethodKind::Metap => (ActionSet::ALL, Some(imprecise), true, false),
            MethodKind::ImpRssi => (ActionSet::RSSI_ONLY, Some(imprecise), false, false),
            MethodKind::CAoA20 => (ActionSet::AOA_ONLY, None, true, false),
            MethodKind::AoaRssi20 | MethodKind::AoaRssi45 => (ActionSet::AOA_ONLY, Some(precise), true, false),
            MethodKind::PfBaseline => (ActionSet::ALL, Some(imprecise), true, true),
        };
        MethodProfile {
            actions,
            rssi,
            aoa,
            particle_filter,
        }
    }

    fn detection_model(&self, likelihood: &RssiLikelihood) -> DetectionModel {
        if let Some(pd) = self.config.forced_pd {
            return DetectionModel::Constant(pd);
        }
        match self.config.filter.detection_level {
            DetectionLevel::Averaged => {
                let (mu_min, mu_max) = likelihood.bias_interval();
                DetectionModel::Interval { mu_min, mu_max }
            }
            DetectionLevel::Midpoint => DetectionModel::Analytic {
                offset_db: likelihood.center_offset(),
            },
            DetectionLevel::Ideal => DetectionModel::Analytic { offset_db: 0.0 },
        }
    }

    fn propagation(&self) -> Propagation<'_> {
        match self.config.propagation {
            PropagationKind::Complex => Propagation::Complex {
                grid: &self.grid,
                vegetation: self.config.vegetation,
            },
            PropagationKind::Ideal => Propagation::Ideal,
        }
    }

    fn spawn_tags(&self, rng: &mut ChaCha8Rng) -> Vec<TagTruth> {
        let c = &self.config;
        let m = c.tags.margin;
        (0..c.tags.count)
            .map(|id| {
                let x = m + rng.random::<f64>() * (c.extent - 2.0 * m);
                let y = m + rng.random::<f64>() * (c.extent - 2.0 * m);
                TagTruth {
                    id,
                    position: Point3::new(x, y, ground_at(&self.grid, x, y) + c.tags.height),
                    mobility: c.tags.mobility,
                }
            })
            .collect()
    }

    pub fn run_mission(&self, seed: u64) -> Result<MissionResult, ScenarioError> {
        self.run(seed, false)
    }

    pub fn run_mission_with_trace(&self, seed: u64) -> Result<MissionResult, ScenarioError> {
        self.run(seed, true)
    }

    fn run(&self, seed: u64, keep_trace: bool) -> Result<MissionResult, ScenarioError> {
        let c = &self.config;
        let profile = self.profile();
        let propagation = self.propagation();
        let planner = &self.planner;
        let area = self.area;

        // truth and filter draw from separate streams of the same seed
        let mut truth_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut filter_rng = ChaCha8Rng::seed_from_u64(seed);
        filter_rng.set_stream(1);

        let birth = UniformBirth::new(area, Some(&self.grid), c.tags.height);
        let dynamics = if profile.particle_filter {
            DynamicsModel {
                survival: 1.0,
                birth: 0.0,
                ..c.filter.dynamics
            }
        } else {
            c.filter.dynamics
        };
        let initial_r = if profile.particle_filter { 1.0 } else { c.filter.initial_r };

        let mut truths = self.spawn_tags(&mut truth_rng);
        let mut tracks: Vec<Track> = truths
            .iter()
            .map(|t| Track {
                id: t.id,
                belief: BernoulliBelief::from_birth(c.filter.particles, initial_r, &birth, &mut filter_rng),
                localized: false,
            })
            .collect();
        let mut results: Vec<TagResult> = truths
            .iter()
            .map(|t| TagResult {
                id: t.id,
                loc_time_s: None,
                error_m: f64::NAN,
                det_m4: f64::NAN,
            })
            .collect();

        let [sx, sy] = c.uav.start;
        let start_ground = ground_at(&self.grid, sx, sy);
        let mut uav = UavState::new(Point3::new(sx, sy, start_ground + c.uav.altitude), c.uav.heading);

        let rssi_clutter = ClutterModel {
            lambda: c.filter.clutter_lambda,
            lo: c.filter.rssi_clutter_range[0],
            hi: c.filter.rssi_clutter_range[1],
        };
        let aoa_clutter = ClutterModel::aoa(c.filter.clutter_lambda);
        let rollout = RolloutModels {
            params: &c.radio,
            pattern: &self.pattern,
            rssi: profile.rssi,
            aoa_sigma: profile.aoa.then_some(c.filter.sigma_a),
            dynamics,
            rssi_clutter,
            aoa_clutter,
        };

        let mut out = MissionResult {
            seed,
            method: c.method,
            total_time_s: 0,
            completed: truths.is_empty(),
            tags: Vec::new(),
            decisions: Vec::new(),
            void_margin_trace: Vec::new(),
            clipped_steps: 0,
            clamped_updates: 0,
            pf_reinitializations: 0,
            aoa_measurements: 0,
            trace: keep_trace.then(Vec::new),
        };
        let mut t: u32 = 0;

        while t < c.time_cap_s && tracks.iter().any(|tr| !tr.localized) {
            let decision = plan(&tracks, &uav, planner, &area, profile.actions, &rollout)
                .expect("an unlocalized track exists");
            let action = decision.action;
            let scope: Vec<BernoulliBelief> = tracks
                .iter()
                .filter(|tr| !tr.localized)
                .map(|tr| tr.belief.clone())
                .collect();
            let epoch_start = uav;
            let mut executed = Vec::with_capacity(action.duration_s() as usize);
            let mut logs: Vec<RotationLog> = tracks
                .iter()
                .map(|tr| RotationLog::new(tr.id, action.rotation_s as f64, action.rotation_s as usize))
                .collect();

            for s in 1..=action.duration_s() {
                if t >= c.time_cap_s {
                    break;
                }
                t += 1;
                let (u, clipped) = step_uav(&epoch_start, &action, s as f64, planner.rotation_rate, &area);
                out.clipped_steps += clipped as u32;
                uav = u;
                executed.push(u);
                for truth in truths.iter_mut() {
                    *truth = step_object(
                        truth,
                        &c.filter.dynamics.process_variance,
                        &area,
                        &self.grid,
                        c.tags.height,
                        &mut truth_rng,
                    );
                }
                let rotating = action.kind == ActionKind::Aoa && s > action.travel_s;
                let rotation_done = action.kind == ActionKind::Aoa && s == action.duration_s();

                for (i, track) in tracks.iter_mut().enumerate() {
                    if track.localized {
                        continue;
                    }
                    let truth = &truths[i];
                    predict(&mut track.belief, &dynamics, &birth, &mut filter_rng);

                    let level = propagation.rssi(&truth.position, &uav, &c.radio, &self.pattern)?;
                    let detected = match c.forced_pd {
                        Some(pd) => {
                            let noise: f64 = truth_rng.sample(StandardNormal);
                            let hit = truth_rng.random::<f64>() < pd;
                            hit.then_some(level + c.radio.sigma_r * noise)
                        }
                        None => draw_rssi_measurement(level, &c.radio, &mut truth_rng),
                    };
                    let clutter = rssi_clutter.sample_scan(&mut truth_rng);

                    if rotating {
                        if let Some(z) = detected {
                            logs[i].push(z, uav.heading);
                        }
                    } else if let Some(likelihood) = profile.rssi {
                        let zs: Vec<f64> = detected.into_iter().chain(clutter).collect();
                        let model = RssiModel {
                            uav,
                            params: &c.radio,
                            pattern: &self.pattern,
                            likelihood,
                            detection: self.detection_model(&likelihood),
                        };
                        self.apply(track, &zs, &model, &rssi_clutter, profile, &birth, &mut filter_rng, &mut out);
                    }

                    if rotation_done && profile.aoa {
                        let aoa_clutter_z = aoa_clutter.sample_scan(&mut truth_rng);
                        if let Ok(m) = self.detector.measure(&logs[i], t as f64) {
                            out.aoa_measurements += 1;
                            let zs: Vec<f64> = std::iter::once(m.angle).chain(aoa_clutter_z).collect();
                            let model = AoaModel {
                                uav,
                                sigma: c.filter.sigma_a,
                            };
                            self.apply(track, &zs, &model, &aoa_clutter, profile, &birth, &mut filter_rng, &mut out);
                        }
                    }

                    if resample_if_needed(&mut track.belief, &mut filter_rng).is_err() {
                        track.belief = BernoulliBelief::from_birth(c.filter.particles, track.belief.r, &birth, &mut filter_rng);
                    }
                    let est = estimate(&track.belief, c.filter.n_th);
                    if est.localized {
                        track.localized = true;
                        results[i] = TagResult {
                            id: track.id,
                            loc_time_s: Some(t),
                            error_m: est.mean.horizontal_distance(&truth.position),
                            det_m4: est.determinant,
                        };
                    }
                    if let Some(trace) = out.trace.as_mut() {
                        trace.push(TraceRow {
                            t,
                            uav_x: uav.position.x,
                            uav_y: uav.position.y,
                            uav_z: uav.position.z,
                            heading: uav.heading,
                            tag_id: track.id,
                            true_x: truth.position.x,
                            true_y: truth.position.y,
                            r: track.belief.r,
                            mean_x: est.mean.x,
                            mean_y: est.mean.y,
                            det_m4: est.determinant,
                            localized: est.localized,
                        });
                    }
                }

                let live: Vec<&BernoulliBelief> =
                    tracks.iter().filter(|tr| !tr.localized).map(|tr| &tr.belief).collect();
                let margin = if live.is_empty() {
                    1.0 - planner.void.threshold
                } else {
                    min_void_margin(&live, &[uav], &planner.void)
                };
                out.void_margin_trace.push(margin);
                if live.is_empty() {
                    break;
                }
            }

            let scope_refs: Vec<&BernoulliBelief> = scope.iter().collect();
            out.decisions.push(DecisionRecord {
                t: t - executed.len() as u32,
                target_id: decision.target_id,
                kind: action.kind,
                heading: action.heading,
                reward: decision.reward,
                fallback: decision.fallback,
                recheck_ok: check_planned_trajectory(&scope_refs, &executed, &dynamics, &planner.void),
                pruned: decision.candidates.iter().filter(|c| c.pruned).count(),
                candidates: decision.candidates.len(),
            });
        }

        for (i, track) in tracks.iter().enumerate() {
            if !track.localized {
                let est = estimate(&track.belief, c.filter.n_th);
                results[i] = TagResult {
                    id: track.id,
                    loc_time_s: None,
                    error_m: est.mean.horizontal_distance(&truths[i].position),
                    det_m4: est.determinant,
                };
            }
        }
        out.completed = tracks.iter().all(|tr| tr.localized);
        out.total_time_s = t;
        out.tags = results;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn apply<M: MeasurementModel>(
        &self,
        track: &mut Track,
        zs: &[f64],
        model: &M,
        clutter: &ClutterModel,
        profile: MethodProfile,
        birth: &UniformBirth<'_>,
        rng: &mut ChaCha8Rng,
        out: &mut MissionResult,
    ) {
        if profile.particle_filter {
            if pf_baseline_update(&mut track.belief, zs, model, birth, rng) == PfOutcome::Reinitialized {
                out.pf_reinitializations += 1;
            }
        } else {
            let d = update(&mut track.belief, zs, model, clutter);
            out.clamped_updates += d.clamped as u32;
        }
    }
}

/// Prepares the scenario and runs one mission.
pub fn run_mission(config: &ScenarioConfig, seed: u64) -> Result<MissionResult, ScenarioError> {
    Scenario::prepare(config)?.run_mission(seed)
}
