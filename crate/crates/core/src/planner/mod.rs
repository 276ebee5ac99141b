//! Seed path planning: goal-biased RRT, node pruning, continuous-curvature
//! spiral smoothing, and curvature-based time reparametrization.

mod rrt;
mod smooth;
mod timing;

pub use rrt::{prune_path, rrt_plan, WaypointPath};
pub use smooth::{
    bezier_eval, bezier_first_derivative, bezier_second_derivative, g2cbs_smooth,
    PathPiece, SmoothPath,
};
pub use timing::{reparametrize_time, select_endpoint, TimeParamPath};

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum PlannerError {
    #[error("RRT exhausted its iteration budget without reaching the goal")]
    PlanTimeout,
    #[error("start or goal is in collision at the planning radius")]
    QueryBlocked,
    #[error("adjacent path segments too short for the curvature-bounded corner construction")]
    CornerTooTight,
    #[error("curvature-velocity map drops below the velocity floor")]
    VelocityUnderflow,
    #[error("spline parameter outside [0, 1]")]
    DomainError,
    #[error("path has fewer than 2 nodes")]
    DegeneratePath,
}

use crate::environment::DistanceField;
use nalgebra::Vector3;

/// Collision check a straight segment by interval sampling at half the
/// field resolution.
pub(crate) fn edge_free(
    field: &DistanceField,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    radius: f64,
) -> bool {
    let step = field.resolution / 2.0;
    let len = (b - a).norm();
    let n = (len / step).ceil().max(1.0) as usize;
    for i in 0..=n {
        let p = a + (b - a) * (i as f64 / n as f64);
        if field.min_distance(&p) < radius {
            return false;
        }
    }
    true
}
