//! Goal-biased RRT over the free space of a distance field, plus greedy
//! shortcut pruning of the resulting waypoint path.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{edge_free, PlannerError};
use crate::environment::DistanceField;

/// Ordered waypoints from start to goal.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    pub nodes: Vec<Vector3<f64>>,
}

impl WaypointPath {
    pub fn length(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }
}

/// RRT growth step length, m.
pub const RRT_STEP: f64 = 0.35;
/// Goal acceptance ball, m.
pub const GOAL_TOL: f64 = 0.3;
/// Probability of sampling the goal directly.
pub const GOAL_BIAS: f64 = 0.10;

/// Grow a goal-biased RRT until it reaches the goal ball, then extract the
/// root-to-goal path. Deterministic for a fixed seed.
pub fn rrt_plan(
    field: &DistanceField,
    start: Vector3<f64>,
    goal: Vector3<f64>,
    radius: f64,
    seed: u64,
    max_iters: usize,
) -> Result<WaypointPath, PlannerError> {
    if field.min_distance(&start) < radius || field.min_distance(&goal) < radius {
        return Err(PlannerError::QueryBlocked);
    }
    if (goal - start).norm() <= GOAL_TOL {
        return Ok(WaypointPath {
            nodes: vec![start],
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = field.origin;
    let hi = field.origin
        + field.resolution
            * Vector3::new(
                field.dims[0] as f64,
                field.dims[1] as f64,
                field.dims[2] as f64,
            );

    let mut nodes: Vec<Vector3<f64>> = vec![start];
    let mut parents: Vec<usize> = vec![0];

    for _ in 0..max_iters {
        let sample = if rng.gen_bool(GOAL_BIAS) {
            goal
        } else {
            Vector3::new(
                rng.gen_range(lo[0]..hi[0]),
                rng.gen_range(lo[1]..hi[1]),
                rng.gen_range(lo[2]..hi[2]),
            )
        };

        // Nearest node.
        let (nearest, _) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, (n - sample).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("tree is never empty");

        let from = nodes[nearest];
        let dir = sample - from;
        let dist = dir.norm();
        if dist < 1e-12 {
            continue;
        }
        let new = from + dir * (RRT_STEP.min(dist) / dist);
        if field.min_distance(&new) < radius || !edge_free(field, &from, &new, radius) {
            continue;
        }
        nodes.push(new);
        parents.push(nearest);
        let idx = nodes.len() - 1;

        let to_goal = (goal - new).norm();
        if to_goal <= GOAL_TOL
            || (to_goal <= RRT_STEP && edge_free(field, &new, &goal, radius))
        {
            let mut path = Vec::new();
            let mut i = idx;
            if to_goal > GOAL_TOL {
                path.push(goal);
            }
            loop {
                path.push(nodes[i]);
                if i == 0 {
                    break;
                }
                i = parents[i];
            }
            path.reverse();
            return Ok(WaypointPath { nodes: path });
        }
    }
    Err(PlannerError::PlanTimeout)
}

/// Remove extraneous nodes by repeatedly shortcutting to the farthest
/// visible node, iterated to a fixed point.
pub fn prune_path(
    path: &WaypointPath,
    field: &DistanceField,
    radius: f64,
) -> WaypointPath {
    let mut nodes = path.nodes.clone();
    loop {
        if nodes.len() <= 2 {
            break;
        }
        let mut kept = vec![nodes[0]];
        let mut i = 0;
        while i < nodes.len() - 1 {
            let mut j = nodes.len() - 1;
            while j > i + 1 && !edge_free(field, &nodes[i], &nodes[j], radius) {
                j -= 1;
            }
            kept.push(nodes[j]);
            i = j;
        }
        if kept.len() == nodes.len() {
            nodes = kept;
            break;
        }
        nodes = kept;
    }
    WaypointPath { nodes }
}
