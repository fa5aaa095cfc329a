//! Myopic measurement and trajectory planning.
//!
//! Each epoch scores every candidate action by rolling the closest
//! unlocalized belief forward under predicted ideal measurements and
//! comparing the pseudo-posterior with the measurement-free prediction.
//! Actions whose trajectory enters a protected cylinder around any
//! unlocalized belief with too much probability are pruned.

use std::f64::consts::{FRAC_PI_3, TAU};

use serde::{Deserialize, Serialize};

use crate::bernoulli::{
    AoaModel, BernoulliBelief, ClutterModel, DetectionModel, DynamicsModel, MeasurementModel, RssiLikelihood,
    RssiModel,
};
use crate::geometry::{Point3, SearchArea, UavState};
use crate::propagation::{GainPattern, RadioParams};

/// Reward returned for Cauchy–Schwarz when the densities are orthogonal.
pub const CS_CAP: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Rssi,
    Aoa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedAction {
    /// Position in the full `2·n_ξ` action list: RSSI first, then AoA.
    pub index: usize,
    pub kind: ActionKind,
    pub heading: f64,
    pub travel_s: u32,
    pub rotation_s: u32,
    pub speed: f64,
}

impl PlannedAction {
    pub fn duration_s(&self) -> u32 {
        self.travel_s + self.rotation_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoidSpec {
    pub radius: f64,
    pub threshold: f64,
}

impl Default for VoidSpec {
    fn default() -> Self {
        Self {
            radius: 50.0,
            threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum RewardKind {
    Renyi { alpha: f64 },
    Shannon,
    CauchySchwarz,
}

impl Default for RewardKind {
    fn default() -> Self {
        RewardKind::Renyi { alpha: 0.1 }
    }
}

impl RewardKind {
    pub fn name(&self) -> &'static str {
        match self {
            RewardKind::Renyi { .. } => "renyi",
            RewardKind::Shannon => "shannon",
            RewardKind::CauchySchwarz => "cauchy_schwarz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub n_headings: usize,
    pub horizon_s: u32,
    pub travel_s: u32,
    pub rotation_s: u32,
    pub speed: f64,
    /// Yaw rate while rotating, rad/s.
    pub rotation_rate: f64,
    pub reward: RewardKind,
    pub void: VoidSpec,
    /// Particles kept for rollouts; the rest of the belief is subsampled away.
    pub planning_particles: usize,
    /// Histogram cell for the Shannon and Cauchy–Schwarz estimators, meters.
    pub histogram_cell: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n_headings: 8,
            horizon_s: 30,
            travel_s: 10,
            rotation_s: 20,
            speed: 10.0,
            rotation_rate: FRAC_PI_3,
            reward: RewardKind::default(),
            void: VoidSpec::default(),
            planning_particles: 600,
            histogram_cell: 20.0,
        }
    }
}

/// Which action families the planner may choose from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSet {
    pub rssi: bool,
    pub aoa: bool,
}

impl ActionSet {
    pub const ALL: ActionSet = ActionSet { rssi: true, aoa: true };
    pub const RSSI_ONLY: ActionSet = ActionSet { rssi: true, aoa: false };
    pub const AOA_ONLY: ActionSet = ActionSet { rssi: false, aoa: true };
}

/// UAV state `elapsed` seconds into `action`.
pub fn uav_state_at(start: &UavState, action: &PlannedAction, elapsed: f64, rotation_rate: f64) -> UavState {
    let travel = elapsed.min(action.travel_s as f64).max(0.0);
    let d = action.speed * travel;
    let p = Point3::new(
        start.position.x + d * action.heading.sin(),
        start.position.y + d * action.heading.cos(),
        start.position.z,
    );
    let spin = (elapsed - action.travel_s as f64).max(0.0);
    let heading = if action.speed > 0.0 || action.travel_s > 0 {
        action.heading
    } else {
        start.heading
    };
    UavState::new(p, heading + rotation_rate * spin)
}

/// States at `1, 2, …, duration` seconds.
pub fn trajectory(start: &UavState, action: &PlannedAction, rotation_rate: f64) -> Vec<UavState> {
    (1..=action.duration_s())
        .map(|t| uav_state_at(start, action, t as f64, rotation_rate))
        .collect()
}

fn make_action(index: usize, kind: ActionKind, heading: f64, cfg: &PlannerConfig) -> PlannedAction {
    let (travel_s, rotation_s) = match kind {
        ActionKind::Rssi => (cfg.horizon_s, 0),
        ActionKind::Aoa => (cfg.travel_s, cfg.rotation_s),
    };
    PlannedAction {
        index,
        kind,
        heading,
        travel_s,
        rotation_s,
        speed: cfg.speed,
    }
}

/// Hover in place and rotate for the whole horizon.
pub fn hover_rotate_action(u: &UavState, cfg: &PlannerConfig) -> PlannedAction {
    PlannedAction {
        index: 2 * cfg.n_headings,
        kind: ActionKind::Aoa,
        heading: u.heading,
        travel_s: 0,
        rotation_s: cfg.horizon_s,
        speed: 0.0,
    }
}

/// Candidate actions whose straight-line travel stays inside `area`. Falls
/// back to a single hover-rotate action when none do.
pub fn enumerate_actions(u: &UavState, cfg: &PlannerConfig, area: &SearchArea, allowed: ActionSet) -> Vec<PlannedAction> {
    let n = cfg.n_headings;
    let mut out = Vec::with_capacity(2 * n);
    for (kind, offset, enabled) in [(ActionKind::Rssi, 0, allowed.rssi), (ActionKind::Aoa, n, allowed.aoa)] {
        if !enabled {
            continue;
        }
        for k in 0..n {
            let a = make_action(offset + k, kind, TAU * k as f64 / n as f64, cfg);
            let end = uav_state_at(u, &a, a.travel_s as f64, cfg.rotation_rate);
            if area.contains(end.position.x, end.position.y) {
                out.push(a);
            }
        }
    }
    if out.is_empty() {
        out.push(hover_rotate_action(u, cfg));
    }
    out
}

/// `(1 − r) + r·(1 − Σ w_i·1[x_i ∈ V])` for the vertical cylinder of radius
/// `radius` around the UAV.
pub fn void_probability(belief: &BernoulliBelief, u: &UavState, radius: f64) -> f64 {
    void_probability_with_r(belief, belief.r, u, radius)
}

fn void_probability_with_r(belief: &BernoulliBelief, r: f64, u: &UavState, radius: f64) -> f64 {
    let r2 = radius * radius;
    let total: f64 = belief.weights.iter().sum();
    let inside: f64 = belief
        .particles
        .iter()
        .zip(&belief.weights)
        .filter(|(p, _)| p.horizontal_distance_sq(&u.position) <= r2)
        .map(|(_, w)| w)
        .sum();
    (1.0 - r) + r * (1.0 - inside / total)
}

/// Smallest `void_probability − threshold` over every state and belief.
pub fn min_void_margin(beliefs: &[&BernoulliBelief], states: &[UavState], void: &VoidSpec) -> f64 {
    let mut margin = f64::INFINITY;
    for b in beliefs {
        let bounds = Bounds::of(b);
        for u in states {
            if bounds.distance_to(&u.position) > void.radius {
                margin = margin.min(1.0 - void.threshold);
                continue;
            }
            margin = margin.min(void_probability(b, u, void.radius) - void.threshold);
        }
    }
    margin
}

/// Passes iff every belief's void probability exceeds the threshold at
/// every state.
pub fn check_void_constraint(beliefs: &[&BernoulliBelief], states: &[UavState], void: &VoidSpec) -> bool {
    min_void_margin(beliefs, states, void) > 0.0
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl Bounds {
    fn of(b: &BernoulliBelief) -> Self {
        let mut bounds = Bounds {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for (p, w) in b.particles.iter().zip(&b.weights) {
            if *w > 0.0 {
                bounds.min_x = bounds.min_x.min(p.x);
                bounds.min_y = bounds.min_y.min(p.y);
                bounds.max_x = bounds.max_x.max(p.x);
                bounds.max_y = bounds.max_y.max(p.y);
            }
        }
        bounds
    }

    fn distance_to(&self, p: &Point3) -> f64 {
        let dx = (self.min_x - p.x).max(p.x - self.max_x).max(0.0);
        let dy = (self.min_y - p.y).max(p.y - self.max_y).max(0.0);
        dx.hypot(dy)
    }
}

/// One tag's belief as seen by the planner.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: usize,
    pub belief: BernoulliBelief,
    pub localized: bool,
}

/// Index into `tracks` of the unlocalized belief whose mean is nearest the
/// UAV; ties go to the lower tag id.
pub fn closest_unlocalized(tracks: &[Track], u: &UavState) -> Option<usize> {
    tracks
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.localized)
        .map(|(i, t)| (t.belief.mean().distance(&u.position), t.id, i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, _, i)| i)
}

/// Models the rollout applies. `None` disables a channel.
#[derive(Debug, Clone, Copy)]
pub struct RolloutModels<'a> {
    pub params: &'a RadioParams,
    pub pattern: &'a GainPattern,
    pub rssi: Option<RssiLikelihood>,
    pub aoa_sigma: Option<f64>,
    pub dynamics: DynamicsModel,
    pub rssi_clutter: ClutterModel,
    pub aoa_clutter: ClutterModel,
}

/// Measurement-free prediction and PIMS pseudo-posterior on shared support.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub prior: BernoulliBelief,
    pub posterior: BernoulliBelief,
}

fn predicted_r(r: f64, dynamics: &DynamicsModel) -> f64 {
    (dynamics.birth * (1.0 - r) + dynamics.survival * r).clamp(0.0, 1.0)
}

/// Deterministic systematic subsample to at most `n` equal-weight particles.
pub fn subsample(belief: &BernoulliBelief, n: usize) -> BernoulliBelief {
    if belief.len() <= n {
        let mut b = belief.clone();
        let _ = b.normalize();
        return b;
    }
    let total: f64 = belief.weights.iter().sum();
    let step = total / n as f64;
    let mut u = 0.5 * step;
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
    BernoulliBelief::from_particles(belief.r, out)
}

fn apply_pims<M: MeasurementModel>(
    model: &M,
    lambda_c: f64,
    r: &mut f64,
    particles: &[Point3],
    log_w: &mut [f64],
) {
    let mut mean = Point3::default();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    for (p, wi) in particles.iter().zip(&w) {
        mean.x += wi * p.x;
        mean.y += wi * p.y;
        mean.z += wi * p.z;
        total += wi;
    }
    let mean = Point3::new(mean.x / total, mean.y / total, mean.z / total);
    let Some(z) = model.ideal_measurement(&mean) else {
        return;
    };
    let mut num = 0.0;
    for ((p, lw), wi) in particles.iter().zip(log_w.iter_mut()).zip(&w) {
        let l = model.likelihood(z, p);
        num += wi * l;
        *lw += l.max(f64::MIN_POSITIVE).ln();
    }
    num /= total;
    *r = if lambda_c > 0.0 {
        let f = num / lambda_c;
        (f * *r / (1.0 - *r + *r * f)).clamp(0.0, 1.0)
    } else if num > 0.0 {
        1.0
    } else {
        *r
    };
}

/// Rolls `belief` forward over `action` one second at a time. Particles stay
/// in place so prior and posterior share support; only the weights and `r`
/// of the posterior respond to the ideal measurements: one RSSI per second
/// of travel and, for AoA actions, one bearing when the rotation ends.
pub fn pims_rollout(
    belief: &BernoulliBelief,
    u: &UavState,
    action: &PlannedAction,
    models: &RolloutModels<'_>,
    rotation_rate: f64,
) -> Rollout {
    let mut prior = belief.clone();
    let _ = prior.normalize();
    let particles = &prior.particles;
    let mut log_w: Vec<f64> = prior.weights.iter().map(|w| w.max(f64::MIN_POSITIVE).ln()).collect();
    let mut r_prior = belief.r;
    let mut r_post = belief.r;
    let duration = action.duration_s();
    for t in 1..=duration {
        r_prior = predicted_r(r_prior, &models.dynamics);
        r_post = predicted_r(r_post, &models.dynamics);
        let ut = uav_state_at(u, action, t as f64, rotation_rate);
        // rotation-phase pulses only feed the bearing detector
        if let (Some(likelihood), true) = (models.rssi, t <= action.travel_s) {
            let model = RssiModel {
                uav: ut,
                params: models.params,
                pattern: models.pattern,
                likelihood,
                detection: DetectionModel::Constant(1.0),
            };
            apply_pims(&model, models.rssi_clutter.intensity(), &mut r_post, particles, &mut log_w);
        }
        if t == duration && action.kind == ActionKind::Aoa {
            if let Some(sigma) = models.aoa_sigma {
                let model = AoaModel { uav: ut, sigma };
                apply_pims(&model, models.aoa_clutter.intensity(), &mut r_post, particles, &mut log_w);
            }
        }
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut posterior = BernoulliBelief {
        r: r_post,
        particles: prior.particles.clone(),
        weights: log_w.iter().map(|l| (l - max).exp()).collect(),
    };
    let _ = posterior.normalize();
    prior.r = r_prior;
    Rollout { prior, posterior }
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Bernoulli Rényi divergence of order `α` between two beliefs on the same
/// particles, `(1/(α−1))·log[(1−r_p)^α(1−r_q)^(1−α) + r_p^α r_q^(1−α)·S]`.
pub fn renyi_reward(prior: &BernoulliBelief, posterior: &BernoulliBelief, alpha: f64) -> f64 {
    assert!(alpha >= 0.0 && alpha != 1.0, "Rényi order must be non-negative and not 1");
    let p = normalized(&prior.weights);
    let q = normalized(&posterior.weights);
    let s: f64 = p
        .iter()
        .zip(&q)
        .filter(|(pi, qi)| **pi > 0.0 && **qi > 0.0)
        .map(|(pi, qi)| pi.powf(alpha) * qi.powf(1.0 - alpha))
        .sum();
    let (rp, rq) = (prior.r, posterior.r);
    let mix = (1.0 - rp).powf(alpha) * (1.0 - rq).powf(1.0 - alpha) + rp.powf(alpha) * rq.powf(1.0 - alpha) * s;
    if mix <= 0.0 {
        return CS_CAP;
    }
    // Hölder bounds mix by 1, so the value is non-negative up to rounding
    (mix.ln() / (alpha - 1.0)).max(0.0)
}

/// Histogram cell index of every particle, shared by prior and posterior.
#[derive(Debug, Clone)]
pub struct HistogramIndex {
    cells: Vec<usize>,
    n_cells: usize,
    cell_area: f64,
}

impl HistogramIndex {
    pub fn new(particles: &[Point3], area: &SearchArea, cell: f64) -> Self {
        let nx = (area.width() / cell).ceil().max(1.0) as usize;
        let ny = (area.height() / cell).ceil().max(1.0) as usize;
        let cells = particles
            .iter()
            .map(|p| {
                let ix = (((p.x - area.min_x) / cell).floor().max(0.0) as usize).min(nx - 1);
                let iy = (((p.y - area.min_y) / cell).floor().max(0.0) as usize).min(ny - 1);
                iy * nx + ix
            })
            .collect();
        Self {
            cells,
            n_cells: nx * ny,
            cell_area: cell * cell,
        }
    }

    fn masses(&self, weights: &[f64]) -> Vec<(usize, f64)> {
        let w = normalized(weights);
        let mut pairs: Vec<(usize, f64)> = self.cells.iter().copied().zip(w).collect();
        pairs.sort_by_key(|(c, _)| *c);
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (c, m) in pairs {
            match out.last_mut() {
                Some((lc, lm)) if *lc == c => *lm += m,
                _ => out.push((c, m)),
            }
        }
        debug_assert!(out.iter().all(|(c, _)| *c < self.n_cells));
        out
    }
}

fn binary_entropy(r: f64) -> f64 {
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    h(r) + h(1.0 - r)
}

/// Binary entropy of `r` plus `r` times the histogram entropy.
pub fn bernoulli_entropy(belief: &BernoulliBelief, index: &HistogramIndex) -> f64 {
    let spatial: f64 = index
        .masses(&belief.weights)
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(_, m)| -m * m.ln())
        .sum();
    binary_entropy(belief.r) + belief.r * spatial
}

pub fn shannon_reward(prior: &BernoulliBelief, posterior: &BernoulliBelief, index: &HistogramIndex) -> f64 {
    bernoulli_entropy(prior, index) - bernoulli_entropy(posterior, index)
}

fn bernoulli_inner(a: &BernoulliBelief, b: &BernoulliBelief, index: &HistogramIndex) -> f64 {
    let ma = index.masses(&a.weights);
    let mb = index.masses(&b.weights);
    let (mut i, mut j, mut spatial) = (0, 0, 0.0);
    while i < ma.len() && j < mb.len() {
        match ma[i].0.cmp(&mb[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                spatial += ma[i].1 * mb[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    (1.0 - a.r) * (1.0 - b.r) + a.r * b.r * spatial / index.cell_area
}

/// `−log[⟨p,q⟩ / (√⟨p,p⟩·√⟨q,q⟩)]` on the histogram, capped at [`CS_CAP`].
pub fn cs_reward(prior: &BernoulliBelief, posterior: &BernoulliBelief, index: &HistogramIndex) -> f64 {
    let pq = bernoulli_inner(prior, posterior, index);
    let pp = bernoulli_inner(prior, prior, index);
    let qq = bernoulli_inner(posterior, posterior, index);
    let ratio = pq / (pp.sqrt() * qq.sqrt());
    if ratio.is_nan() || ratio <= 0.0 {
        return CS_CAP;
    }
    (-ratio.ln()).clamp(0.0, CS_CAP)
}

pub fn reward(kind: &RewardKind, rollout: &Rollout, index: &HistogramIndex) -> f64 {
    match *kind {
        RewardKind::Renyi { alpha } => renyi_reward(&rollout.prior, &rollout.posterior, alpha),
        RewardKind::Shannon => shannon_reward(&rollout.prior, &rollout.posterior, index),
        RewardKind::CauchySchwarz => cs_reward(&rollout.prior, &rollout.posterior, index),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateLog {
    pub action: PlannedAction,
    pub reward: f64,
    pub void_margin: f64,
    pub pruned: bool,
}

/// Outcome of one planning epoch, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanDecision {
    pub target_id: usize,
    pub action: PlannedAction,
    pub reward: f64,
    /// Every candidate violated the void constraint; the least-bad one was taken.
    pub fallback: bool,
    pub candidates: Vec<CandidateLog>,
}

/// Picks the action maximizing the reward for the closest unlocalized
/// belief among those satisfying the void constraint. Ties go to the lower
/// action index. Returns `None` when every track is localized.
pub fn plan(
    tracks: &[Track],
    u: &UavState,
    cfg: &PlannerConfig,
    area: &SearchArea,
    allowed: ActionSet,
    models: &RolloutModels<'_>,
) -> Option<PlanDecision> {
    let target = closest_unlocalized(tracks, u)?;
    let focus = subsample(&tracks[target].belief, cfg.planning_particles);
    let index = HistogramIndex::new(&focus.particles, area, cfg.histogram_cell);
    let screened: Vec<(&BernoulliBelief, Bounds)> = tracks
        .iter()
        .filter(|t| !t.localized)
        .map(|t| (&t.belief, Bounds::of(&t.belief)))
        .collect();

    let mut candidates = Vec::new();
    for action in enumerate_actions(u, cfg, area, allowed) {
        let states = trajectory(u, &action, cfg.rotation_rate);
        let margin = rollout_void_margin(&screened, &states, models, &cfg.void);
        let pruned = margin <= 0.0;
        let reward = if pruned {
            0.0
        } else {
            let rollout = pims_rollout(&focus, u, &action, models, cfg.rotation_rate);
            reward(&cfg.reward, &rollout, &index)
        };
        candidates.push(CandidateLog {
            action,
            reward,
            void_margin: margin,
            pruned,
        });
    }

    let best = candidates
        .iter()
        .filter(|c| !c.pruned)
        .fold(None::<&CandidateLog>, |best, c| match best {
            Some(b) if b.reward >= c.reward => Some(b),
            _ => Some(c),
        });
    let (chosen, fallback) = match best {
        Some(c) => (c, false),
        None => {
            let c = candidates
                .iter()
                .fold(None::<&CandidateLog>, |best, c| match best {
                    Some(b) if b.void_margin >= c.void_margin => Some(b),
                    _ => Some(c),
                })
                .expect("at least one candidate");
            (c, true)
        }
    };
    Some(PlanDecision {
        target_id: tracks[target].id,
        action: chosen.action,
        reward: chosen.reward,
        fallback,
        candidates: candidates.clone(),
    })
}

/// Void margin along `states` with each belief's existence probability
/// predicted forward one step per state.
fn rollout_void_margin(
    beliefs: &[(&BernoulliBelief, Bounds)],
    states: &[UavState],
    models: &RolloutModels<'_>,
    void: &VoidSpec,
) -> f64 {
    let mut margin = f64::INFINITY;
    for (b, bounds) in beliefs {
        let mut r = b.r;
        for u in states {
            r = predicted_r(r, &models.dynamics);
            let pv = if bounds.distance_to(&u.position) > void.radius {
                1.0
            } else {
                void_probability_with_r(b, r, u, void.radius)
            };
            margin = margin.min(pv - void.threshold);
        }
    }
    margin
}

/// Re-checks an executed trajectory against the beliefs that were in scope
/// when it was planned, with the same `r` prediction the planner used.
pub fn check_planned_trajectory(
    beliefs: &[&BernoulliBelief],
    states: &[UavState],
    dynamics: &DynamicsModel,
    void: &VoidSpec,
) -> bool {
    let mut ok = true;
    for b in beliefs {
        let mut r = b.r;
        for u in states {
            r = predicted_r(r, dynamics);
            ok &= void_probability_with_r(b, r, u, void.radius) > void.threshold;
        }
    }
    ok
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::bernoulli::{estimate, UniformBirth};

    fn area() -> SearchArea {
        SearchArea::square(2000.0)
    }

    fn center() -> UavState {
        UavState::new(Point3::new(1000.0, 1000.0, 80.0), 0.0)
    }

    fn diffuse(seed: u64, n: usize) -> BernoulliBelief {
        let birth = UniformBirth::new(area(), None, 0.2);
        BernoulliBelief::from_birth(n, 0.5, &birth, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn models<'a>(params: &'a RadioParams, pattern: &'a GainPattern) -> RolloutModels<'a> {
        RolloutModels {
            params,
            pattern,
            rssi: Some(RssiLikelihood::Imprecise {
                sigma: 4.0,
                mu_min: -5.0,
                mu_max: 1.0,
            }),
            aoa_sigma: Some(0.095),
            dynamics: DynamicsModel::default(),
            rssi_clutter: ClutterModel::rssi(0.05),
            aoa_clutter: ClutterModel::aoa(0.05),
        }
    }

    #[test]
    fn full_action_set_at_center() {
        let cfg = PlannerConfig::default();
        let actions = enumerate_actions(&center(), &cfg, &area(), ActionSet::ALL);
        assert_eq!(actions.len(), 16);
        for w in actions[..8].windows(2) {
            assert!((w[1].heading - w[0].heading - TAU / 8.0).abs() < 1e-12);
        }
        assert!(actions.iter().all(|a| a.duration_s() == cfg.horizon_s));
    }

    #[test]
    fn corner_prunes_and_cornered_falls_back() {
        let cfg = PlannerConfig::default();
        let corner = UavState::new(Point3::new(1.0, 1.0, 80.0), PI / 4.0);
        let actions = enumerate_actions(&corner, &cfg, &area(), ActionSet::ALL);
        assert!(actions.len() < 16 && !actions.is_empty());
        let tiny = SearchArea::square(50.0);
        let cornered = enumerate_actions(&UavState::new(Point3::new(25.0, 25.0, 80.0), 0.0), &cfg, &tiny, ActionSet::ALL);
        assert_eq!(cornered.len(), 1);
        assert_eq!(cornered[0].speed, 0.0);
        assert_eq!(cornered[0].duration_s(), cfg.horizon_s);
    }

    #[test]
    fn kinematics() {
        let cfg = PlannerConfig::default();
        let u = UavState::new(Point3::new(0.0, 0.0, 80.0), 1.0);
        let a = make_action(8, ActionKind::Aoa, 0.0, &cfg);
        let s = uav_state_at(&u, &a, 10.0, cfg.rotation_rate);
        assert!((s.position.y - 100.0).abs() < 1e-9 && s.position.x.abs() < 1e-9);
        let s2 = uav_state_at(&u, &a, 16.0, cfg.rotation_rate);
        assert!(s2.heading < 1e-9 || (TAU - s2.heading) < 1e-9);
        assert_eq!(s2.position, s.position);
        assert_eq!(s2.position.z, 80.0);
    }

    #[test]
    fn void_probability_examples() {
        let u = center();
        let mut b = BernoulliBelief::from_particles(0.0, vec![u.position; 10]);
        assert_eq!(void_probability(&b, &u, 50.0), 1.0);
        b.r = 1.0;
        assert_eq!(void_probability(&b, &u, 50.0), 0.0);
        let mut half = vec![u.position; 5];
        half.extend(vec![Point3::new(1500.0, 1000.0, 0.0); 5]);
        let b = BernoulliBelief::from_particles(1.0, half);
        assert!((void_probability(&b, &u, 50.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn void_constraint_examples() {
        let u = center();
        let far = BernoulliBelief::from_particles(1.0, vec![Point3::new(100.0, 100.0, 0.0); 10]);
        let on_path = BernoulliBelief::from_particles(1.0, vec![Point3::new(1000.0, 1100.0, 0.0); 10]);
        let cfg = PlannerConfig::default();
        let a = make_action(0, ActionKind::Rssi, 0.0, &cfg);
        let states = trajectory(&u, &a, cfg.rotation_rate);
        assert!(check_void_constraint(&[&far], &states, &cfg.void));
        assert!(!check_void_constraint(&[&on_path], &states, &cfg.void));
    }

    #[test]
    fn closest_selection() {
        let u = center();
        let at = |x: f64, id: usize, localized: bool| Track {
            id,
            belief: BernoulliBelief::from_particles(1.0, vec![Point3::new(x, 1000.0, 80.0)]),
            localized,
        };
        assert_eq!(closest_unlocalized(&[at(1500.0, 3, false)], &u), Some(0));
        let tracks = [at(1500.0, 0, false), at(1100.0, 1, false), at(1050.0, 2, true)];
        assert_eq!(closest_unlocalized(&tracks, &u), Some(1));
        let tie = [at(1100.0, 7, false), at(900.0, 4, false)];
        assert_eq!(closest_unlocalized(&tie, &u), Some(1));
        assert_eq!(closest_unlocalized(&[at(1.0, 0, true)], &u), None);
    }

    #[test]
    fn rollout_point_mass_is_unchanged_and_pure() {
        let params = RadioParams::default();
        let pattern = GainPattern::default();
        let m = models(&params, &pattern);
        let b = BernoulliBelief::from_particles(0.9, vec![Point3::new(1500.0, 1500.0, 0.2); 20]);
        let snapshot = b.clone();
        let cfg = PlannerConfig::default();
        let a = make_action(1, ActionKind::Rssi, PI / 4.0, &cfg);
        let ro = pims_rollout(&b, &center(), &a, &m, cfg.rotation_rate);
        assert_eq!(b, snapshot);
        for (p, q) in ro.prior.weights.iter().zip(&ro.posterior.weights) {
            assert!((p - q).abs() < 1e-12);
        }
        assert_eq!(ro.prior.particles, ro.posterior.particles);
    }

    #[test]
    fn aoa_rollout_shrinks_diffuse_cloud() {
        let params = RadioParams::default();
        let pattern = GainPattern::default();
        let m = models(&params, &pattern);
        let b = diffuse(3, 600);
        let cfg = PlannerConfig::default();
        let a = make_action(9, ActionKind::Aoa, PI / 4.0, &cfg);
        let ro = pims_rollout(&b, &center(), &a, &m, cfg.rotation_rate);
        let before = estimate(&ro.prior, 0.0).determinant;
        let after = estimate(&ro.posterior, 0.0).determinant;
        assert!(after < before, "{after} vs {before}");
    }

    #[test]
    fn rewards_vanish_for_identical_beliefs() {
        let b = diffuse(4, 300);
        let index = HistogramIndex::new(&b.particles, &area(), 20.0);
        assert!(renyi_reward(&b, &b, 0.1).abs() < 1e-12);
        assert!(shannon_reward(&b, &b, &index).abs() < 1e-12);
        assert!(cs_reward(&b, &b, &index).abs() < 1e-12);
    }

    #[test]
    fn shannon_tracks_binary_entropy_for_point_mass() {
        let pts = vec![Point3::new(5.0, 5.0, 0.0); 10];
        let prior = BernoulliBelief::from_particles(0.5, pts.clone());
        let post = BernoulliBelief::from_particles(0.9, pts);
        let index = HistogramIndex::new(&prior.particles, &area(), 20.0);
        let expected = binary_entropy(0.5) - binary_entropy(0.9);
        assert!((shannon_reward(&prior, &post, &index) - expected).abs() < 1e-12);
        assert!(expected > 0.0);
    }

    #[test]
    fn shannon_rewards_concentration() {
        let prior = diffuse(5, 400);
        let mut post = prior.clone();
        for (w, p) in post.weights.iter_mut().zip(&post.particles) {
            *w *= (-(p.x - 1000.0).powi(2) / (2.0 * 200.0f64.powi(2))).exp();
        }
        post.normalize().unwrap();
        let index = HistogramIndex::new(&prior.particles, &area(), 20.0);
        assert!(shannon_reward(&prior, &post, &index) > 0.0);
    }

    #[test]
    fn cs_symmetric_and_capped() {
        let a = diffuse(6, 200);
        let mut b = a.clone();
        b.weights.iter_mut().enumerate().for_each(|(i, w)| *w *= 1.0 + (i % 7) as f64);
        b.normalize().unwrap();
        let index = HistogramIndex::new(&a.particles, &area(), 20.0);
        assert!((cs_reward(&a, &b, &index) - cs_reward(&b, &a, &index)).abs() < 1e-12);

        let pts = vec![Point3::new(10.0, 10.0, 0.0), Point3::new(1900.0, 1900.0, 0.0)];
        let mut left = BernoulliBelief::from_particles(1.0, pts.clone());
        left.weights = vec![1.0, 0.0];
        let mut right = BernoulliBelief::from_particles(1.0, pts);
        right.weights = vec![0.0, 1.0];
        let index = HistogramIndex::new(&left.particles, &area(), 20.0);
        assert_eq!(cs_reward(&left, &right, &index), CS_CAP);
    }

    #[test]
    fn distant_diffuse_belief_prefers_moving_rssi_towards_it() {
        let params = RadioParams::default();
        let pattern = GainPattern::default();
        let m = models(&params, &pattern);
        let cfg = PlannerConfig::default();
        let u = UavState::new(Point3::new(200.0, 200.0, 80.0), PI / 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let birth = UniformBirth::new(SearchArea::new(1300.0, 1300.0, 1900.0, 1900.0), None, 0.2);
        let b = BernoulliBelief::from_birth(2000, 0.5, &birth, &mut rng);
        let tracks = [Track {
            id: 0,
            belief: b,
            localized: false,
        }];
        let d = plan(&tracks, &u, &cfg, &area(), ActionSet::ALL, &m).unwrap();
        assert!(!d.fallback);
        assert_eq!(d.action.kind, ActionKind::Rssi);
        assert!((d.action.heading - PI / 4.0).abs() < TAU / 8.0 + 1e-9, "{}", d.action.heading);
    }

    #[test]
    fn surrounded_uav_triggers_fallback() {
        let params = RadioParams::default();
        let pattern = GainPattern::default();
        let m = models(&params, &pattern);
        let cfg = PlannerConfig::default();
        let u = center();
        let b = BernoulliBelief::from_particles(1.0, vec![u.position; 50]);
        let tracks = [Track {
            id: 0,
            belief: b,
            localized: false,
        }];
        let d = plan(&tracks, &u, &cfg, &area(), ActionSet::ALL, &m).unwrap();
        assert!(d.fallback);
        assert!(d.candidates.iter().all(|c| c.pruned));
    }

    #[test]
    fn ties_go_to_lower_index() {
        let params = RadioParams::default();
        let pattern = GainPattern::default();
        let mut m = models(&params, &pattern);
        m.rssi = None;
        m.aoa_sigma = None;
        let cfg = PlannerConfig::default();
        let tracks = [Track {
            id: 0,
            belief: diffuse(8, 100),
            localized: false,
        }];
        let far = UavState::new(Point3::new(1000.0, 1000.0, 80.0), 0.0);
        let mut t = tracks.clone();
        t[0].belief.particles.iter_mut().for_each(|p| p.x = 1900.0 + (p.x % 50.0));
        let d = plan(&t, &far, &cfg, &area(), ActionSet::ALL, &m).unwrap();
        // with no measurement channel every reward is equal
        assert!(d.candidates.iter().all(|c| c.reward == d.candidates[0].reward));
        assert_eq!(d.action.index, d.candidates.iter().filter(|c| !c.pruned).map(|c| c.action.index).min().unwrap());
    }
}
