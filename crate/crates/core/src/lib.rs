//! Terrain-aware VHF propagation, Bernoulli particle filtering with imprecise
//! RSSI and compensated rotation AoA measurements, and void-constrained
//! information-driven planning for localizing radio-tagged wildlife from a
//! small UAV.
//!
//! The crate is organised bottom-up:
//!
//! - [`terrain`]: elevation grids, line-of-sight profiles, vegetation and
//!   knife-edge diffraction losses.
//! - [`propagation`]: antenna gain patterns, RSSI synthesis and detection
//!   probability.
//! - [`bearing`]: rotation-based angle-of-arrival detectors.
//! - [`bernoulli`]: the per-tag Bernoulli particle filter.
//! - [`planner`]: joint measurement and trajectory planning.
//! - [`scenario`]: mission simulation, comparison methods and Monte-Carlo
//!   aggregation.

pub mod bearing;
pub mod bernoulli;
pub mod geometry;
pub mod planner;
pub mod propagation;
pub mod scenario;
pub mod stats;
pub mod terrain;

pub use geometry::{Point3, SearchArea, UavState};
