//! `trim`: minimum steady coordinated-turn radius for a sweep of
//! angle-of-attack caps, as CSV.

use poststall::harness::{trim_turn_radius, HarnessError};

use crate::output::{write_atomic, Csv};
use crate::{CliError, Context};

/// Parse a `lo:hi:step` sweep in degrees into radians, inclusive of the
/// upper end when the step lands on it.
fn parse_caps(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || CliError::Config(format!("--caps: expected LO:HI:STEP in degrees, got `{spec}`"));
    if parts.len() != 3 {
        return Err(err());
    }
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
    let nums = nums.map_err(|_| err())?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && hi >= lo && lo > 0.0) {
        return Err(err());
    }
    let mut caps = Vec::new();
    let mut deg = lo;
    while deg <= hi + 1e-9 {
        caps.push(deg.to_radians());
        deg += step;
    }
    Ok(caps)
}

pub fn run(ctx: &Context, caps: &str) -> Result<(), CliError> {
    let caps = parse_caps(caps)?;
    let results = trim_turn_radius(&caps, (0.5, 10.0), &ctx.params).map_err(|e| match e {
        HarnessError::Config(msg) => CliError::Config(format!("trim: {msg}")),
        other => CliError::Domain(format!("trim: {other}")),
    })?;
    let mut csv = Csv::new(&[
        "cap_deg",
        "radius",
        "speed",
        "alpha",
        "turn_rate",
        "thrust",
        "residual",
    ]);
    for r in &results {
        csv.num_row(&[
            r.alpha_cap.to_degrees(),
            r.radius,
            r.speed,
            r.alpha,
            r.turn_rate,
            r.thrust,
            r.residual,
        ]);
    }
    let path = write_atomic(&ctx.out_dir, "trim.csv", &csv.finish())?;
    println!("wrote {}", path.display());
    Ok(())
}
