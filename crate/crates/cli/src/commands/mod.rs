pub mod benchmark;
pub mod optimize;
pub mod plan;
pub mod simulate;
pub mod trim;

use poststall::environment::{build_field, DistanceField};
use poststall::harness::plan_corridor;
use poststall::planner::TimeParamPath;

use crate::{CliError, Context, D_MAX, KAPPA_GAIN, KAPPA_MAX, PLANNING_RADIUS, RESOLUTION, V_MAX};

/// Rasterize the map and plan the kinematic corridor path through it.
pub(crate) fn plan_seed_path(ctx: &Context) -> Result<(DistanceField, TimeParamPath), CliError> {
    let field = build_field(&ctx.spec, RESOLUTION, D_MAX)
        .map_err(|e| CliError::Config(format!("map: {e}")))?;
    let tp = plan_corridor(
        &field,
        ctx.spec.start,
        ctx.spec.goal,
        PLANNING_RADIUS,
        KAPPA_MAX,
        V_MAX,
        KAPPA_GAIN,
        ctx.seed,
    )
    .map_err(|e| CliError::Domain(format!("seed planning failed: {e}")))?;
    Ok((field, tp))
}
