#![allow(clippy::field_reassign_with_default)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wildtrack_core::bernoulli::ClutterModel;
use wildtrack_core::planner::ActionKind;
use wildtrack_core::scenario::{
    run_monte_carlo, MethodKind, Mobility, PropagationKind, Scenario, ScenarioConfig, TerrainSource,
};
use wildtrack_core::terrain::TerrainKind;

fn desk(class: TerrainKind, tags: usize) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.terrain = TerrainSource::Synthetic {
        class,
        relief: None,
        seed: 1,
    };
    c.extent = 1000.0;
    c.tags.count = tags;
    c
}

fn lossless(tags: usize) -> ScenarioConfig {
    let mut c = desk(TerrainKind::Flat, tags);
    c.propagation = PropagationKind::Ideal;
    c.vegetation.enabled = false;
    c
}

#[test]
fn single_static_tag_without_noise_localizes_quickly() {
    let mut c = lossless(1);
    c.tags.mobility = Mobility::Static;
    c.radio.sigma_r = 1e-3;
    c.filter.clutter_lambda = 0.0;
    let r = Scenario::prepare(&c).unwrap().run_mission(3).unwrap();
    assert!(r.completed);
    let tag = &r.tags[0];
    assert!(tag.error_m <= 30.0, "error {}", tag.error_m);
    assert!(tag.loc_time_s.unwrap() <= 300, "time {:?}", tag.loc_time_s);
}

#[test]
fn zero_tags_complete_immediately() {
    let r = Scenario::prepare(&lossless(0)).unwrap().run_mission(0).unwrap();
    assert!(r.completed);
    assert_eq!(r.total_time_s, 0);
    assert!(r.tags.is_empty());
    assert!(r.decisions.is_empty());
}

#[test]
fn same_seed_same_result() {
    let s = Scenario::prepare(&desk(TerrainKind::Hilly, 2)).unwrap();
    let a = s.run_mission_with_trace(11).unwrap();
    let b = s.run_mission_with_trace(11).unwrap();
    assert_eq!(a, b);
    let c = s.run_mission(12).unwrap();
    assert_ne!(a.tags, c.tags);
}

#[test]
fn stricter_threshold_never_finishes_earlier() {
    for seed in 0..4 {
        let mut times = Vec::new();
        for n_th in [4e4, 2e4, 5e3] {
            let mut c = desk(TerrainKind::Flat, 1);
            c.filter.n_th = n_th;
            let r = Scenario::prepare(&c).unwrap().run_mission(seed).unwrap();
            times.push(r.tags[0].loc_time_s.unwrap_or(u32::MAX));
        }
        assert!(times.windows(2).all(|w| w[0] <= w[1]), "seed {seed}: {times:?}");
    }
}

#[test]
fn clutter_rate_matches_lambda() {
    let clutter = ClutterModel::rssi(0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let hits = (0..n).filter(|_| clutter.sample_scan(&mut rng).is_some()).count();
    let rate = hits as f64 / n as f64;
    assert!((rate - 0.05).abs() <= 0.05 * 0.05, "rate {rate}");
}

#[test]
fn aoa_used_sparingly_on_flat_and_more_in_mountains() {
    let trials = 25;
    let fraction = |c: &ScenarioConfig| {
        let s = Scenario::prepare(c).unwrap();
        let (results, _) = run_monte_carlo(&s, trials, 0).unwrap();
        let (aoa, total) = results.iter().fold((0usize, 0usize), |(a, t), r| {
            let n = r.decisions.iter().filter(|d| d.kind == ActionKind::Aoa).count();
            (a + n, t + r.decisions.len())
        });
        aoa as f64 / total as f64
    };
    let flat = fraction(&lossless(2));
    let mountain = fraction(&desk(TerrainKind::Mountain, 2));
    assert!(flat < 0.2, "flat AoA fraction {flat}");
    assert!(mountain > flat, "mountain {mountain} vs flat {flat}");
}

#[test]
fn comparison_methods_keep_their_action_families() {
    for method in [MethodKind::ImpRssi, MethodKind::CAoA20, MethodKind::AoaRssi45] {
        let mut c = desk(TerrainKind::Flat, 1);
        c.method = method;
        c.time_cap_s = 600;
        let r = Scenario::prepare(&c).unwrap().run_mission(1).unwrap();
        let aoa = r.aoa_fraction();
        match method {
            MethodKind::ImpRssi => assert_eq!(aoa, 0.0, "{method:?}"),
            _ => assert_eq!(aoa, 1.0, "{method:?}"),
        }
    }
}
