//! `simulate`: closed receding-horizon loop on the truth model; logged
//! samples and replan records as CSV, run summary as structured text.

use poststall::harness::{closed_loop_run, RunConfig, RunLog, RunOutcome, TimingMode};
use poststall::params::AircraftParams;

use crate::config;
use crate::output::{num, text, write_atomic, Csv};
use crate::{CliError, Context, Expectation, Mode, OnOff};

use super::optimize::{INPUT_COLS, STATE_COLS};

fn samples_csv(log: &RunLog) -> String {
    let mut header = vec!["t"];
    header.extend(STATE_COLS);
    header.extend(INPUT_COLS);
    header.extend(["plan_id", "clearance", "wing_aoa"]);
    let mut csv = Csv::new(&header);
    for s in &log.samples {
        let mut row = vec![num(s.t)];
        row.extend(s.state.iter().map(|&v| num(v)));
        row.extend(s.input.iter().map(|&v| num(v)));
        row.push(s.plan_id.to_string());
        row.push(num(s.clearance));
        row.push(num(s.wing_aoa));
        csv.row(&row);
    }
    csv.finish()
}

fn replans_csv(log: &RunLog) -> String {
    let mut csv = Csv::new(&[
        "t",
        "plan_id",
        "activated",
        "active_from",
        "solve_time",
        "status",
        "outer_iterations",
        "inner_iterations",
        "max_defect",
        "max_clearance_violation",
        "note",
    ]);
    for r in &log.replans {
        let (status, outer, inner, defect, clearance) = match &r.report {
            Some(rep) => (
                format!("{:?}", rep.status),
                rep.outer_iterations.to_string(),
                rep.inner_iterations.to_string(),
                num(rep.max_defect),
                num(rep.max_clearance_violation),
            ),
            None => (
                "NoSolve".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ),
        };
        csv.row(&[
            num(r.t),
            r.plan_id.to_string(),
            r.activated.to_string(),
            num(r.active_from),
            num(r.solve_time),
            status,
            outer,
            inner,
            defect,
            clearance,
            text(&r.note),
        ]);
    }
    csv.finish()
}

fn summary_text(log: &RunLog) -> String {
    let mut s = format!(
        "outcome: {:?}\n\
         end_time: {}\n\
         goal_distance: {}\n\
         min_clearance: {}\n\
         samples: {}\n\
         replans: {}\n\
         replans_activated: {}\n",
        log.outcome,
        num(log.end_time),
        num(log.goal_distance),
        num(log.min_clearance),
        log.samples.len(),
        log.replans.len(),
        log.replans.iter().filter(|r| r.activated).count(),
    );
    for (name, aoa) in &log.peak_aoa {
        s.push_str(&format!("peak_aoa_{name}: {}\n", num(*aoa)));
    }
    s
}

pub fn run(
    ctx: &Context,
    feedback: OnOff,
    mismatch: &str,
    mode: Mode,
    expect: Option<Expectation>,
) -> Result<(), CliError> {
    let truth = match mismatch {
        "none" => ctx.params.clone(),
        "paper" => AircraftParams::edge540_24in_identified(),
        path => config::load_params(std::path::Path::new(path))?,
    };
    let cfg = RunConfig {
        feedback: feedback == OnOff::On,
        truth_params: truth,
        model_params: ctx.params.clone(),
        rng_seed: ctx.seed,
        mode: match mode {
            Mode::Lockstep => TimingMode::Lockstep,
            Mode::Realtime => TimingMode::Realtime,
        },
        solver: ctx.solver,
        ..RunConfig::default()
    };
    let log = closed_loop_run(&ctx.spec, &cfg)
        .map_err(|e| CliError::Config(format!("simulation: {e}")))?;

    let path = write_atomic(&ctx.out_dir, "samples.csv", &samples_csv(&log))?;
    println!("wrote {}", path.display());
    let path = write_atomic(&ctx.out_dir, "replans.csv", &replans_csv(&log))?;
    println!("wrote {}", path.display());
    let path = write_atomic(&ctx.out_dir, "summary.txt", &summary_text(&log))?;
    println!("wrote {}", path.display());
    println!(
        "outcome: {:?} at t = {} s (goal distance {}, min clearance {})",
        log.outcome,
        num(log.end_time),
        num(log.goal_distance),
        num(log.min_clearance)
    );

    if expect == Some(Expectation::Success) && log.outcome != RunOutcome::ReachedGoal {
        return Err(CliError::Domain(format!(
            "expected the run to reach the goal, got {:?}",
            log.outcome
        )));
    }
    Ok(())
}
