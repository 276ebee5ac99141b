//! `benchmark`: solve quality and computation cost versus knot count on
//! the 90-degree corner fixture, as a CSV table of medians.

use poststall::harness::{benchmark_knots, HarnessError};
use poststall::trajopt::Transcription;

use crate::output::{write_atomic, Csv};
use crate::{CliError, Context};

pub fn run(
    ctx: &Context,
    method: Transcription,
    knots: &[usize],
    trials: usize,
    warm: bool,
) -> Result<(), CliError> {
    let rows = benchmark_knots(method, knots, trials, warm, ctx.seed).map_err(|e| match e {
        HarnessError::Config(msg) => CliError::Config(format!("benchmark: {msg}")),
        other => CliError::Domain(format!("benchmark: {other}")),
    })?;
    let mut csv = Csv::new(&[
        "n",
        "solve_time",
        "dynamics_time",
        "feasibility",
        "following_cost",
    ]);
    for r in &rows {
        csv.num_row(&[
            r.n as f64,
            r.solve_time,
            r.dynamics_time,
            r.feasibility,
            r.following_cost,
        ]);
    }
    let path = write_atomic(&ctx.out_dir, "benchmark.csv", &csv.finish())?;
    println!("wrote {}", path.display());
    Ok(())
}
