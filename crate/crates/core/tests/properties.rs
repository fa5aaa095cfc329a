use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wildtrack_core::bearing::{alpha_grid, compensated_aoa, corr_coef_aoa, cross_corr_aoa, RotationLog};
use wildtrack_core::bernoulli::{
    estimate, resample_to, rssi_imprecise_likelihood, update, BernoulliBelief, ClutterModel, FnModel,
};
use wildtrack_core::geometry::{circular_distance, wrap_angle, Point3, UavState};
use wildtrack_core::planner::{renyi_reward, void_probability};
use wildtrack_core::propagation::{
    detection_probability_for_level, interval_detection_probability, GainPattern, RadioParams,
};
use wildtrack_core::stats::normal_pdf;

const STEP: f64 = TAU / 360.0;

/// Rotation log following the pattern at `bearing` with a bounded wobble.
fn log_for(bearing: f64, headings: &[f64], wobble: &[f64]) -> RotationLog {
    let pattern = GainPattern::default_synthetic();
    let mut log = RotationLog::new(0, 20.0, headings.len());
    for (h, w) in headings.iter().zip(wobble) {
        log.push(-100.0 + pattern.gain_db(bearing - h) + w, *h);
    }
    log
}

fn belief_strategy() -> impl Strategy<Value = BernoulliBelief> {
    (
        0.01f64..0.99,
        prop::collection::vec(((0.0f64..500.0), (0.0f64..500.0), (1e-3f64..1.0)), 5..60),
    )
        .prop_map(|(r, pts)| {
            let mut b = BernoulliBelief::from_particles(r, pts.iter().map(|p| Point3::new(p.0, p.1, 0.0)).collect());
            b.weights = pts.iter().map(|p| p.2).collect();
            b.normalize().unwrap();
            b
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corr_coef_ignores_affine_rescaling(
        bearing in 0.0f64..TAU,
        start in 0usize..360,
        wobble in prop::collection::vec(-0.5f64..0.5, 24),
        scale in 0.2f64..5.0,
        shift in -40.0f64..40.0,
    ) {
        let headings: Vec<f64> = (0..24).map(|i| (start + 15 * i) as f64 * STEP).collect();
        let base = log_for(bearing, &headings, &wobble);
        let mut scaled = base.clone();
        scaled.pulses.iter_mut().for_each(|p| p.rssi_dbm = scale * p.rssi_dbm + shift);
        let pattern = GainPattern::default_synthetic();
        let alphas = alpha_grid(1.0);
        let a = corr_coef_aoa(&base, &pattern, &alphas).unwrap();
        let b = corr_coef_aoa(&scaled, &pattern, &alphas).unwrap();
        prop_assert!(circular_distance(a, b) <= STEP + 1e-9, "{a} vs {b}");
    }

    #[test]
    fn cross_corr_turns_with_the_rotation(
        bearing in 0.0f64..TAU,
        turn in 0usize..360,
        wobble in prop::collection::vec(-0.5f64..0.5, 36),
    ) {
        let headings: Vec<f64> = (0..36).map(|i| (10 * i) as f64 * STEP).collect();
        let delta = turn as f64 * STEP;
        let turned: Vec<f64> = headings.iter().map(|h| h + delta).collect();
        let pattern = GainPattern::default_synthetic();
        let alphas = alpha_grid(1.0);
        let a = cross_corr_aoa(&log_for(bearing, &headings, &wobble), &pattern, &alphas).unwrap();
        let b = cross_corr_aoa(&log_for(bearing + delta, &turned, &wobble), &pattern, &alphas).unwrap();
        prop_assert!(circular_distance(wrap_angle(a - delta), b) <= STEP + 1e-9, "{a} {b} {delta}");
    }

    #[test]
    fn compensated_is_z1_or_its_reverse(z1 in -10.0f64..10.0, z2 in -10.0f64..10.0, th in 0.1f64..PI) {
        let c = compensated_aoa(z1, z2, th);
        prop_assert!(circular_distance(c, z1) < 1e-9 || circular_distance(c, z1 - PI) < 1e-9);
        prop_assert!((0.0..TAU).contains(&c));
    }

    #[test]
    fn wrapped_angles_stay_in_range(a in -1e4f64..1e4) {
        let w = wrap_angle(a);
        prop_assert!((0.0..TAU).contains(&w));
        prop_assert!(circular_distance(w, a) < 1e-9);
    }

    #[test]
    fn imprecise_likelihood_is_a_probability_that_grows_with_the_interval(
        z in -140.0f64..-40.0,
        h in -140.0f64..-40.0,
        sigma in 0.5f64..10.0,
        lo in -40.0f64..0.0,
        width in 0.0f64..40.0,
        extra in 0.0f64..10.0,
    ) {
        let l = rssi_imprecise_likelihood(z, h, sigma, lo, lo + width);
        prop_assert!((0.0..=1.0).contains(&l));
        prop_assert!(rssi_imprecise_likelihood(z, h, sigma, lo - extra, lo + width + extra) >= l - 1e-15);
    }

    #[test]
    fn detection_probability_is_monotone_and_interval_bounded(
        level in -160.0f64..-80.0,
        step in 0.0f64..20.0,
        lo in -30.0f64..0.0,
        width in 0.0f64..30.0,
    ) {
        let p = RadioParams::default();
        let a = detection_probability_for_level(level, &p);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(detection_probability_for_level(level + step, &p) >= a);
        let avg = interval_detection_probability(level, lo, lo + width, &p);
        let pl = detection_probability_for_level(level + lo, &p);
        let ph = detection_probability_for_level(level + lo + width, &p);
        prop_assert!(avg >= pl - 1e-12 && avg <= ph + 1e-12, "{pl} <= {avg} <= {ph}");
    }

    #[test]
    fn update_keeps_weights_normalized_and_r_in_range(
        mut belief in belief_strategy(),
        zs in prop::collection::vec(0.0f64..500.0, 0..3),
        pd in 0.0f64..=1.0,
        lambda in 0.0f64..1.0,
    ) {
        let model = FnModel {
            pd: |_: &Point3| pd,
            likelihood: |z: f64, x: &Point3| normal_pdf(z, x.x, 50.0),
        };
        let clutter = ClutterModel { lambda, lo: 0.0, hi: 500.0 };
        let d = update(&mut belief, &zs, &model, &clutter);
        prop_assert!((0.0..=1.0).contains(&belief.r));
        prop_assert!(!d.clamped);
        let total: f64 = belief.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(belief.weights.iter().all(|w| *w >= 0.0 && w.is_finite()));
    }

    #[test]
    fn resampling_draws_from_the_support(belief in belief_strategy(), n in 1usize..200, seed in any::<u64>()) {
        let mut b = belief.clone();
        resample_to(&mut b, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(b.len(), n);
        prop_assert!(b.particles.iter().all(|p| belief.particles.contains(p)));
        prop_assert!((b.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(b.r, belief.r);
    }

    #[test]
    fn estimate_and_void_probability_are_well_formed(
        belief in belief_strategy(),
        ux in 0.0f64..500.0,
        uy in 0.0f64..500.0,
        radius in 1.0f64..200.0,
    ) {
        let e = estimate(&belief, 1e4);
        prop_assert!(e.determinant >= 0.0);
        prop_assert!(e.cov_xy[0] >= 0.0 && e.cov_xy[3] >= 0.0);
        let u = UavState::new(Point3::new(ux, uy, 80.0), 0.0);
        let pv = void_probability(&belief, &u, radius);
        prop_assert!((0.0..=1.0).contains(&pv));
        prop_assert!(void_probability(&belief, &u, radius * 2.0) <= pv + 1e-12);
    }

    #[test]
    fn renyi_is_non_negative_and_zero_on_itself(
        belief in belief_strategy(),
        factors in prop::collection::vec(0.0f64..2.0, 60),
        rq in 0.0f64..=1.0,
        alpha in 0.05f64..0.95,
    ) {
        prop_assert!(renyi_reward(&belief, &belief, alpha).abs() < 1e-9);
        let mut post = belief.clone();
        post.r = rq;
        post.weights.iter_mut().zip(&factors).for_each(|(w, f)| *w *= f + 1e-6);
        prop_assert!(renyi_reward(&belief, &post, alpha) >= 0.0);
    }
}
