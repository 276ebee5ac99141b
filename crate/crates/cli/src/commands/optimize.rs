//! `optimize`: dynamically feasible trajectory along the seed path as
//! CSV, the solver report as structured text, and the tracking policy's
//! gains and cost-to-go diagonals as CSV.

use std::path::Path;

use poststall::dynamics::state_derivative_vec;
use poststall::state::{InputVec, StateVec, STATE_DIM};
use poststall::trajopt::{
    seed_from_path, solve, Bounds, NlpProblem, Solution, Trajectory, Transcription,
};
use poststall::tvlqr::{riccati_backward, TvlqrWeights};

use crate::output::{num, write_atomic, Csv};
use crate::{CliError, Context, PLANNING_RADIUS, RESOLUTION};

pub(crate) const STATE_COLS: [&str; STATE_DIM] = [
    "x", "y", "z", "roll", "pitch", "yaw", "delta_ar", "delta_al", "delta_e", "delta_r",
    "thrust", "vx", "vy", "vz", "wx", "wy", "wz",
];
pub(crate) const INPUT_COLS: [&str; 5] = ["u_ar", "u_al", "u_e", "u_r", "u_t"];

fn read_state_file(path: &Path) -> Result<StateVec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("state file {}: {e}", path.display())))?;
    let values: Result<Vec<f64>, _> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(str::parse::<f64>)
        .collect();
    let values =
        values.map_err(|e| CliError::Config(format!("state file {}: {e}", path.display())))?;
    if values.len() != STATE_DIM {
        return Err(CliError::Config(format!(
            "state file {}: expected {STATE_DIM} numbers, found {}",
            path.display(),
            values.len()
        )));
    }
    Ok(StateVec::from_column_slice(&values))
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let mut header = vec!["t"];
    header.extend(STATE_COLS);
    header.extend(INPUT_COLS);
    let mut csv = Csv::new(&header);
    for k in 0..traj.states.len() {
        let mut row = vec![traj.h * k as f64];
        row.extend(traj.states[k].iter().copied());
        row.extend(traj.inputs[k].iter().copied());
        csv.num_row(&row);
    }
    csv.finish()
}

fn report_text(sol: &Solution, method: Transcription, knots: usize) -> String {
    let r = &sol.report;
    format!(
        "status: {:?}\n\
         warm_started: {}\n\
         outer_iterations: {}\n\
         inner_iterations: {}\n\
         max_defect: {}\n\
         max_clearance_violation: {}\n\
         method: {:?}\n\
         knots: {}\n\
         step_length: {}\n\
         duration: {}\n",
        r.status,
        r.warm_started,
        r.outer_iterations,
        r.inner_iterations,
        num(r.max_defect),
        num(r.max_clearance_violation),
        method,
        knots,
        num(sol.trajectory.h),
        num(sol.trajectory.duration()),
    )
}

pub fn run(
    ctx: &Context,
    knots: usize,
    method: Transcription,
    horizon: f64,
    warm: Option<&Path>,
) -> Result<(), CliError> {
    if knots == 0 {
        return Err(CliError::Config("--knots must be positive".into()));
    }
    if !(horizon > 0.0) {
        return Err(CliError::Config("--horizon must be positive".into()));
    }
    let warm_state = warm.map(read_state_file).transpose()?;

    let (field, tp) = super::plan_seed_path(ctx)?;
    let bounds = Bounds::flight_envelope();
    let span = horizon
        .min(tp.total_time)
        .max(knots as f64 * bounds.h_min);
    let seed = seed_from_path(&tp, 0.0, knots, span, &ctx.params, &bounds);
    let f = |x: &StateVec, u: &InputVec| state_derivative_vec(x, u, &ctx.params);

    // The clearance radius cannot exceed what the start and goal states
    // actually have.
    let margin = RESOLUTION * 0.5;
    let radius = PLANNING_RADIUS
        .min(field.min_distance(&ctx.spec.start) - margin)
        .min(field.min_distance(&ctx.spec.goal) - margin)
        .max(0.05);

    // The kinematic seed's first knot is not a state the aircraft can be
    // in; solve once with a loose start box to land on a consistent
    // start, then pin it (the same two-stage scheme the closed loop
    // uses for cold replans).
    let relaxed = NlpProblem {
        n: knots,
        method,
        bounds,
        x_init: seed.states[0],
        tol_init: Bounds::endpoint_tolerance(),
        x_final: seed.states[knots],
        tol_final: Bounds::endpoint_tolerance(),
        field: Some(&field),
        radius,
    };
    let pre = solve(&relaxed, &f, &seed, None, &ctx.solver)
        .map_err(|e| CliError::Domain(format!("pre-solve failed: {e}")))?;
    let problem = NlpProblem {
        x_init: pre.trajectory.states[0],
        tol_init: NlpProblem::pin_tolerance(),
        ..relaxed
    };
    let base = solve(&problem, &f, &pre.trajectory, Some(&pre.warm), &ctx.solver)
        .map_err(|e| CliError::Domain(format!("solve failed: {e}")))?;

    let solution = match warm_state {
        Some(x_init) => {
            if !base.report.is_feasible() {
                return Err(CliError::Domain(
                    "base solve infeasible; nothing to warm-start from".into(),
                ));
            }
            let perturbed = NlpProblem { x_init, ..problem };
            let mut warm_seed = base.trajectory.clone();
            warm_seed.states[0] = x_init;
            solve(&perturbed, &f, &warm_seed, Some(&base.warm), &ctx.solver)
                .map_err(|e| CliError::Domain(format!("warm re-solve failed: {e}")))?
        }
        None => base,
    };

    let path = write_atomic(&ctx.out_dir, "trajectory.csv", &trajectory_csv(&solution.trajectory))?;
    println!("wrote {}", path.display());
    let path = write_atomic(
        &ctx.out_dir,
        "report.txt",
        &report_text(&solution, method, knots),
    )?;
    println!("wrote {}", path.display());

    if solution.report.is_feasible() {
        let weights = TvlqrWeights::default();
        let policy = riccati_backward(
            &solution.trajectory,
            &ctx.params,
            &weights,
            4,
            bounds.u_min,
            bounds.u_max,
        )
        .map_err(|e| CliError::Domain(format!("policy synthesis failed: {e}")))?;
        let mut header: Vec<String> = vec!["t".into()];
        let (kr, kc) = (policy.k_mats[0].nrows(), policy.k_mats[0].ncols());
        for r in 0..kr {
            for c in 0..kc {
                header.push(format!("k{r}_{c}"));
            }
        }
        for c in 0..STATE_DIM {
            header.push(format!("s_{c}"));
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(&header_refs);
        for (i, t) in policy.times.iter().enumerate() {
            let mut row = vec![*t];
            for r in 0..kr {
                for c in 0..kc {
                    row.push(policy.k_mats[i][(r, c)]);
                }
            }
            for c in 0..STATE_DIM {
                row.push(policy.s_mats[i][(c, c)]);
            }
            csv.num_row(&row);
        }
        let path = write_atomic(&ctx.out_dir, "policy.csv", &csv.finish())?;
        println!("wrote {}", path.display());
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "optimization did not converge: {:?} (max defect {}, max clearance violation {})",
            solution.report.status,
            num(solution.report.max_defect),
            num(solution.report.max_clearance_violation),
        )))
    }
}
