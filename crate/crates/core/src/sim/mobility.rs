//! Random-waypoint movement on the grid.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{GridSpec, NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointParams {
    /// Meters covered per frame.
    pub step_distance: f64,
    /// Frames spent at a waypoint before the next one is drawn.
    pub pause_frames: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Walker {
    pub position: Point,
    pub waypoint: Point,
    pub pause_remaining: u32,
}

pub fn uniform_point<R: Rng + ?Sized>(grid: &GridSpec, rng: &mut R) -> Point {
    Point {
        x: rng.random_range(0.0..grid.width()),
        y: rng.random_range(0.0..grid.height()),
    }
}

impl Walker {
    pub fn spawn<R: Rng + ?Sized>(grid: &GridSpec, rng: &mut R) -> Self {
        let position = uniform_point(grid, rng);
        let waypoint = uniform_point(grid, rng);
        Self {
            position,
            waypoint,
            pause_remaining: 0,
        }
    }

    /// Advances one frame. While paused the walker stays put; when the pause
    /// runs out a fresh waypoint is drawn.
    pub fn step<R: Rng + ?Sized>(&mut self, params: &WaypointParams, grid: &GridSpec, rng: &mut R) {
        if self.pause_remaining > 0 {
            self.pause_remaining -= 1;
            if self.pause_remaining == 0 {
                self.waypoint = uniform_point(grid, rng);
            }
            return;
        }
        let d = self.position.distance(self.waypoint);
        if d <= params.step_distance {
            self.position = self.waypoint;
            self.pause_remaining = params.pause_frames;
            if params.pause_frames == 0 {
                self.waypoint = uniform_point(grid, rng);
            }
        } else {
            let f = params.step_distance / d;
            self.position.x += (self.waypoint.x - self.position.x) * f;
            self.position.y += (self.waypoint.y - self.position.y) * f;
        }
    }
}

/// How users move during an episode.
#[derive(Debug, Clone, PartialEq)]
pub enum MobilityModel {
    RandomWaypoint(WaypointParams),
    /// Points of attachment given frame by frame.
    Scripted(Vec<Vec<NodeId>>),
}

/// Per-user points of attachment for the current positions.
pub fn associate(topology: &Topology, walkers: &[Walker]) -> Vec<NodeId> {
    walkers
        .iter()
        .map(|w| topology.attach(w.position.x, w.position.y))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        GridSpec {
            rows: 4,
            cols: 4,
            cell_size: 100.0,
        }
    }

    const PARAMS: WaypointParams = WaypointParams {
        step_distance: 10.0,
        pause_frames: 3,
    };

    #[test]
    fn paused_walker_stays() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Point { x: 50.0, y: 50.0 };
        let mut w = Walker {
            position: p,
            waypoint: p,
            pause_remaining: 3,
        };
        w.step(&PARAMS, &grid(), &mut rng);
        assert_eq!(w.position, p);
        assert_eq!(w.pause_remaining, 2);
    }

    #[test]
    fn arrives_exactly_then_pauses() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = Point { x: 52.0, y: 50.0 };
        let mut w = Walker {
            position: Point { x: 50.0, y: 50.0 },
            waypoint: target,
            pause_remaining: 0,
        };
        w.step(&PARAMS, &grid(), &mut rng);
        assert_eq!(w.position, target);
        assert_eq!(w.pause_remaining, 3);
        // Three paused frames, then movement resumes toward a new waypoint.
        for left in [2, 1, 0] {
            w.step(&PARAMS, &grid(), &mut rng);
            assert_eq!(w.position, target);
            assert_eq!(w.pause_remaining, left);
        }
        assert_ne!(w.waypoint, target);
    }

    #[test]
    fn moves_by_step_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut w = Walker {
            position: Point { x: 0.0, y: 0.0 },
            waypoint: Point { x: 30.0, y: 40.0 },
            pause_remaining: 0,
        };
        w.step(&PARAMS, &grid(), &mut rng);
        assert!((w.position.x - 6.0).abs() < 1e-12);
        assert!((w.position.y - 8.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn stays_inside_grid(seed in any::<u64>(), steps in 1usize..300) {
            let g = grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut w = Walker::spawn(&g, &mut rng);
            for _ in 0..steps {
                w.step(&PARAMS, &g, &mut rng);
                prop_assert!((0.0..=g.width()).contains(&w.position.x));
                prop_assert!((0.0..=g.height()).contains(&w.position.y));
            }
        }
    }
}
