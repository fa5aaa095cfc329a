//! Plain sampling-importance-resampling filter used as the comparison
//! baseline: no existence probability, no detection or clutter terms.

use rand::Rng;

use crate::bernoulli::{BernoulliBelief, BirthDensity, MeasurementModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfOutcome {
    /// Empty scan; nothing to update with.
    Skipped,
    Updated,
    /// Every weight vanished and the cloud was redrawn from the birth density.
    Reinitialized,
}

/// Multiplies each weight by `Σ_z L(z|x)`. The belief's `r` is left at 1.
pub fn pf_baseline_update<M, B, R>(
    belief: &mut BernoulliBelief,
    measurements: &[f64],
    model: &M,
    birth: &B,
    rng: &mut R,
) -> PfOutcome
where
    M: MeasurementModel + ?Sized,
    B: BirthDensity,
    R: Rng + ?Sized,
{
    if measurements.is_empty() {
        return PfOutcome::Skipped;
    }
    for (w, x) in belief.weights.iter_mut().zip(&belief.particles) {
        *w *= measurements.iter().map(|&z| model.likelihood(z, x)).sum::<f64>();
    }
    if belief.normalize().is_ok() {
        return PfOutcome::Updated;
    }
    log::debug!("particle filter weights collapsed; reinitializing");
    let n = belief.len();
    *belief = BernoulliBelief::from_birth(n, 1.0, birth, rng);
    PfOutcome::Reinitialized
}
