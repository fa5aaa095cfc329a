//! Mission simulation: truth dynamics, measurement synthesis, filter and
//! planner orchestration, comparison methods and Monte-Carlo aggregation.

pub mod config;
pub mod kinematics;
pub mod mission;
pub mod montecarlo;
pub mod pf;

pub use config::{
    default_imprecision, AntennaSource, ConfigError, DetectionLevel, FilterConfig, MethodKind, Mobility,
    PropagationKind, ScenarioConfig, TagConfig, TerrainSource, UavConfig,
};
pub use kinematics::{step_object, step_uav, TagTruth};
pub use mission::{load_pattern, run_mission, DecisionRecord, MissionResult, Scenario, ScenarioError, TagResult, TraceRow};
pub use montecarlo::{run_monte_carlo, trial_seed, MonteCarloSummary, Stats};
pub use pf::{pf_baseline_update, PfOutcome};
