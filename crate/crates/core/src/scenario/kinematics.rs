use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::geometry::{Point3, SearchArea, UavState};
use crate::planner::{uav_state_at, PlannedAction};
use crate::terrain::TerrainGrid;

use super::config::Mobility;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TagTruth {
    pub id: usize,
    pub position: Point3,
    pub mobility: Mobility,
}

/// Ground elevation, falling back to the grid minimum on NoData.
pub fn ground_at(grid: &TerrainGrid, x: f64, y: f64) -> f64 {
    grid.elevation_at(x, y).unwrap_or_else(|_| grid.elevation_range().0)
}

/// One second of the wandering model: Gaussian step with covariance
/// `diag(variance)`, kept inside the area and re-seated `height` above the
/// ground. Static tags never move and consume no randomness.
pub fn step_object<R: Rng + ?Sized>(
    tag: &TagTruth,
    variance: &[f64; 3],
    area: &SearchArea,
    grid: &TerrainGrid,
    height: f64,
    rng: &mut R,
) -> TagTruth {
    if tag.mobility == Mobility::Static {
        return *tag;
    }
    let e: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    let (x, y) = area.clamp(
        tag.position.x + variance[0].sqrt() * e[0],
        tag.position.y + variance[1].sqrt() * e[1],
    );
    TagTruth {
        position: Point3::new(x, y, ground_at(grid, x, y) + height),
        ..*tag
    }
}

/// UAV state `elapsed` seconds into `action`, clipped to the area. The flag
/// reports a clip, which the planner's boundary pruning should prevent.
pub fn step_uav(
    start: &UavState,
    action: &PlannedAction,
    elapsed: f64,
    rotation_rate: f64,
    area: &SearchArea,
) -> (UavState, bool) {
    let mut u = uav_state_at(start, action, elapsed, rotation_rate);
    let (x, y) = area.clamp(u.position.x, u.position.y);
    let clipped = x != u.position.x || y != u.position.y;
    u.position.x = x;
    u.position.y = y;
    (u, clipped)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_3, TAU};

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::planner::ActionKind;

    fn flat() -> TerrainGrid {
        TerrainGrid::constant(2000.0, 2000.0, 10.0, 100.0)
    }

    fn action(kind: ActionKind, heading: f64, travel_s: u32, rotation_s: u32) -> PlannedAction {
        PlannedAction {
            index: 0,
            kind,
            heading,
            travel_s,
            rotation_s,
            speed: 10.0,
        }
    }

    #[test]
    fn travel_and_rotation() {
        let area = SearchArea::square(2000.0);
        let u = UavState::new(Point3::new(500.0, 500.0, 180.0), 2.0);
        let (v, clipped) = step_uav(&u, &action(ActionKind::Rssi, 0.0, 30, 0), 10.0, FRAC_PI_3, &area);
        assert!(!clipped);
        assert!((v.position.y - 600.0).abs() < 1e-9);
        assert!((v.position.x - 500.0).abs() < 1e-9);
        assert_eq!(v.heading, 0.0);

        let a = action(ActionKind::Aoa, 1.0, 10, 20);
        let (before, _) = step_uav(&u, &a, 10.0, FRAC_PI_3, &area);
        let (after, _) = step_uav(&u, &a, 16.0, FRAC_PI_3, &area);
        assert!((after.heading - before.heading).abs() < 1e-9 || (after.heading - before.heading).abs() > TAU - 1e-9);
        assert_eq!(after.position, before.position);
        assert_eq!(after.position.z, u.position.z);
    }

    #[test]
    fn leaving_the_area_is_clipped() {
        let area = SearchArea::square(2000.0);
        let u = UavState::new(Point3::new(1950.0, 1000.0, 80.0), 0.0);
        let (v, clipped) = step_uav(&u, &action(ActionKind::Rssi, TAU / 4.0, 30, 0), 30.0, FRAC_PI_3, &area);
        assert!(clipped);
        assert_eq!(v.position.x, 2000.0);
    }

    #[test]
    fn wandering_statistics_and_static_identity() {
        let grid = flat();
        let area = SearchArea::square(2000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let start = TagTruth {
            id: 0,
            position: Point3::new(1000.0, 1000.0, 100.2),
            mobility: Mobility::Wandering,
        };
        let var = [2.5, 2.5, 0.0025];
        let n = 10_000;
        let mut dx = Vec::with_capacity(n);
        let mut tag = start;
        for _ in 0..n {
            let next = step_object(&tag, &var, &area, &grid, 0.2, &mut rng);
            dx.push(next.position.x - tag.position.x);
            assert!((next.position.z - 100.2).abs() < 1e-9);
            tag = next;
        }
        let mean = dx.iter().sum::<f64>() / n as f64;
        let sd = (dx.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd - 2.5f64.sqrt()).abs() < 0.05, "{sd}");

        let still = TagTruth {
            mobility: Mobility::Static,
            ..start
        };
        assert_eq!(step_object(&still, &var, &area, &grid, 0.2, &mut rng), still);
        let frozen = TagTruth {
            mobility: Mobility::Wandering,
            ..start
        };
        let moved = step_object(&frozen, &[0.0; 3], &area, &grid, 0.2, &mut rng);
        assert_eq!(moved.position, start.position);
    }
}
