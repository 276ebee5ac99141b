//! Closed-loop receding-horizon simulation: plan from the current true
//! state, optimize, rebuild the tracking policy, and fly the truth model
//! between replans. Also hosts the knot-count benchmark and the
//! steady-turn radius analysis.

mod bench;
mod trim;

pub use bench::{benchmark_knots, following_cost, warm_start_study, BenchRow, FollowingCost};
pub use trim::{trim_turn_radius, turn_radius, TrimResult};

use std::time::Instant;

use nalgebra::Vector3;
use thiserror::Error;

use crate::dynamics::{self, DynamicsError};
use crate::environment::{build_field, DistanceField, EnvironmentError, HallwaySpec};
use crate::params::AircraftParams;
use crate::planner::{
    g2cbs_smooth, prune_path, reparametrize_time, rrt_plan, TimeParamPath,
};
use crate::state::{AircraftState, ControlInput, InputVec, StateVec};
use crate::trajopt::{
    seed_from_path, solve, Bounds, NlpProblem, NlpReport, SolverConfig, Trajectory,
    Transcription,
};
use crate::tvlqr::{riccati_backward, TvlqrPolicy, TvlqrWeights};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error("no steady turn satisfies the angle-of-attack cap {0:.3} rad")]
    TrimInfeasible(f64),
}

/// Whether replanning is treated as instantaneous at the tick or the
/// measured solve time delays activation of the new plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingMode {
    Lockstep,
    Realtime,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub replan_hz: f64,
    /// Planning horizon per replan, s.
    pub horizon: f64,
    /// Apply the tracking feedback between replans; off flies the raw
    /// optimized inputs open loop.
    pub feedback: bool,
    /// Plant dynamics the simulator integrates.
    pub truth_params: AircraftParams,
    /// Dynamics the planner and policy believe in.
    pub model_params: AircraftParams,
    pub rng_seed: u64,
    pub max_sim_time: f64,
    /// Truth integrator step, s.
    pub sim_dt: f64,
    /// Logging period, s.
    pub sample_dt: f64,
    pub mode: TimingMode,
    pub n_knots: usize,
    pub method: Transcription,
    /// Clearance radius the optimizer enforces at the knots, m.
    pub planning_radius: f64,
    /// True collision radius of the airframe, m.
    pub hard_radius: f64,
    /// Goal ball radius, m.
    pub goal_tol: f64,
    /// Seed-path cruise speed, m/s.
    pub v_max: f64,
    /// Curvature-to-slowdown gain for the seed path timing.
    pub kappa_gain: f64,
    /// Curvature bound for path smoothing, 1/m.
    pub kappa_max: f64,
    /// Voxel resolution of the distance field, m.
    pub resolution: f64,
    /// Distance-field saturation, m.
    pub d_max: f64,
    /// Riccati grid refinement per knot interval.
    pub grid_refinement: usize,
    pub solver: SolverConfig,
    pub weights: TvlqrWeights,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            replan_hz: 5.0,
            horizon: 1.0,
            feedback: true,
            truth_params: AircraftParams::edge540_24in(),
            model_params: AircraftParams::edge540_24in(),
            rng_seed: 0,
            max_sim_time: 20.0,
            sim_dt: 1e-3,
            sample_dt: 1e-2,
            mode: TimingMode::Lockstep,
            n_knots: 10,
            method: Transcription::HermiteSimpson,
            planning_radius: 0.55,
            hard_radius: 0.15,
            goal_tol: 0.3,
            v_max: 4.0,
            kappa_gain: 1.0,
            kappa_max: 2.0,
            resolution: 0.05,
            d_max: 5.0,
            grid_refinement: 4,
            // Cold replans (hand-launch, or re-acquisition after a failed
            // cycle) need room for the inner subproblems to converge
            // before the penalty inflates; the library default budget is
            // tuned for warm, well-seeded problems.
            solver: SolverConfig {
                max_outer: 30,
                max_inner: 200,
                ..SolverConfig::default()
            },
            weights: TvlqrWeights::default(),
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), HarnessError> {
        let ok = self.replan_hz > 0.0
            && self.horizon > 0.0
            && self.sim_dt > 0.0
            && self.sample_dt >= self.sim_dt
            && self.max_sim_time > 0.0
            && self.n_knots > 0
            && self.planning_radius >= self.hard_radius
            && self.hard_radius > 0.0
            && self.goal_tol > 0.0
            && self.resolution > 0.0
            && self.grid_refinement > 0;
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(
                "run configuration fails basic sanity checks".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    ReachedGoal,
    Collided,
    Diverged,
    Timeout,
}

/// One logged instant of the true trajectory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub state: StateVec,
    pub input: InputVec,
    /// Id of the plan whose policy produced the input; -1 before the
    /// first plan activates.
    pub plan_id: i64,
    /// True distance to the nearest obstacle, m.
    pub clearance: f64,
    /// Wing angle of attack under the truth model, rad.
    pub wing_aoa: f64,
}

/// Record of one replanning attempt.
#[derive(Debug, Clone)]
pub struct ReplanRecord {
    pub t: f64,
    pub plan_id: i64,
    /// Optimizer report; absent when seed planning failed first.
    pub report: Option<NlpReport>,
    /// True when this attempt produced and activated a new policy.
    pub activated: bool,
    /// Simulation time at which the new plan took effect.
    pub active_from: f64,
    /// Wall-clock solve time, s; zero in lockstep mode so logs stay
    /// byte-reproducible.
    pub solve_time: f64,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub outcome: RunOutcome,
    pub samples: Vec<Sample>,
    pub replans: Vec<ReplanRecord>,
    pub min_clearance: f64,
    /// Peak absolute angle of attack per truth-model surface, rad.
    pub peak_aoa: Vec<(String, f64)>,
    /// Simulated time at termination, s.
    pub end_time: f64,
    /// Distance to the goal at termination, m.
    pub goal_distance: f64,
}

impl RunLog {
    pub fn peak_wing_aoa(&self) -> f64 {
        self.peak_aoa
            .iter()
            .find(|(name, _)| name == "wing")
            .map(|(_, a)| *a)
            .unwrap_or(0.0)
    }
}

/// Plan currently being flown.
struct ActivePlan {
    id: i64,
    /// Simulation time of the plan's t = 0.
    t0: f64,
    trajectory: Trajectory,
    policy: Option<TvlqrPolicy>,
}

impl ActivePlan {
    fn input(&self, t: f64, x: &StateVec, bounds: &Bounds) -> InputVec {
        let tau = t - self.t0;
        match &self.policy {
            Some(p) => p.feedback_control(tau, x),
            None => {
                let (_, mut u) = self.trajectory.sample(tau);
                for i in 0..u.len() {
                    u[i] = u[i].clamp(bounds.u_min[i], bounds.u_max[i]);
                }
                u
            }
        }
    }
}

/// Hand-launch state at the corridor start: level flight along the
/// start heading at the cruise speed with a modest thrust setting.
pub fn initial_state(spec: &HallwaySpec, cfg: &RunConfig) -> StateVec {
    let mut s = AircraftState::zero();
    s.r = spec.start;
    s.theta = Vector3::new(0.0, 0.0, spec.start_yaw);
    s.v = Vector3::new(cfg.v_max, 0.0, 0.0);
    s.delta_t = 0.3 * cfg.truth_params.mass * cfg.truth_params.gravity;
    s.to_vector()
}

/// Physical actuator travel stops applied to the plant state after each
/// integration step: the servos cannot move the surfaces past their
/// stops even if the commanded rates would.
pub fn clamp_actuators(x: &mut StateVec, bounds: &Bounds) {
    for i in 6..10 {
        x[i] = x[i].clamp(bounds.x_min[i], bounds.x_max[i]);
    }
    x[10] = x[10].max(0.0);
}

/// One fixed-step RK4 step of the plant under a held input.
pub fn rk4_step(
    x: &StateVec,
    u: &InputVec,
    dt: f64,
    params: &AircraftParams,
) -> Result<StateVec, DynamicsError> {
    let k1 = dynamics::state_derivative_vec(x, u, params)?;
    let k2 = dynamics::state_derivative_vec(&(x + k1 * (dt / 2.0)), u, params)?;
    let k3 = dynamics::state_derivative_vec(&(x + k2 * (dt / 2.0)), u, params)?;
    let k4 = dynamics::state_derivative_vec(&(x + k3 * dt), u, params)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Seed-plan a collision-free timed path from `start` to the goal.
/// Retries the sampling planner with derived seeds when smoothing or
/// timing rejects a particular path.
pub fn plan_corridor(
    field: &DistanceField,
    start: Vector3<f64>,
    goal: Vector3<f64>,
    radius: f64,
    kappa_max: f64,
    v_max: f64,
    kappa_gain: f64,
    seed: u64,
) -> Result<TimeParamPath, String> {
    // The sampling planner needs start and goal clear by the corridor
    // radius; cap it by the actual clearances (the airframe may be
    // legitimately closer to a wall than the knot clearance radius, and
    // the goal may sit near the corridor end).
    let margin = field.resolution * 0.5;
    let r = radius
        .min(field.min_distance(&start) - margin)
        .min(field.min_distance(&goal) - margin)
        .max(0.05);
    let mut last = String::new();
    for attempt in 0..4u64 {
        let s = seed ^ (attempt.wrapping_mul(0x9e3779b97f4a7c15));
        let path = match rrt_plan(field, start, goal, r, s, 50_000) {
            Ok(p) => prune_path(&p, field, r),
            Err(e) => {
                last = format!("sampling: {e}");
                continue;
            }
        };
        let smooth = match g2cbs_smooth(&path, kappa_max) {
            Ok(sm) => sm,
            Err(e) => {
                last = format!("smoothing: {e}");
                continue;
            }
        };
        match reparametrize_time(smooth, v_max, kappa_gain) {
            Ok(tp) => return Ok(tp),
            Err(e) => last = format!("timing: {e}"),
        }
    }
    Err(last)
}

/// Shift every yaw knot by a whole number of turns so the seed agrees
/// with the continuously unwrapped yaw of the current state.
fn align_seed_yaw(seed: &mut Trajectory, yaw: f64) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let turns = ((yaw - seed.states[0][5]) / two_pi).round();
    if turns != 0.0 {
        for x in &mut seed.states {
            x[5] += turns * two_pi;
        }
    }
}

fn surface_aoas(x: &StateVec, u: &InputVec, params: &AircraftParams) -> Vec<f64> {
    let state = AircraftState::from_vector(x);
    let input = ControlInput::from_vector(u);
    params
        .surfaces
        .iter()
        .map(|s| {
            let rate = match &s.actuation {
                Some(act) => input.surface_rates[act.channel],
                None => 0.0,
            };
            match dynamics::surface_velocity(&state, s, params, rate) {
                Ok(v_s) => dynamics::surface_aoa(&v_s, params.eps_velocity)
                    .map(f64::abs)
                    .unwrap_or(0.0),
                Err(_) => 0.0,
            }
        })
        .collect()
}

/// Run the full receding-horizon stack on a hallway map.
pub fn closed_loop_run(spec: &HallwaySpec, cfg: &RunConfig) -> Result<RunLog, HarnessError> {
    cfg.validate()?;
    spec.validate()?;
    let field = build_field(spec, cfg.resolution, cfg.d_max)?;
    if field.min_distance(&spec.start) < cfg.hard_radius {
        return Err(HarnessError::Config("start pose is in collision".into()));
    }
    let bounds = Bounds::flight_envelope();
    let model = cfg.model_params.clone();
    let f = |x: &StateVec, u: &InputVec| dynamics::state_derivative_vec(x, u, &model);

    let steps_per_replan = ((1.0 / (cfg.replan_hz * cfg.sim_dt)).round() as usize).max(1);
    let steps_per_sample = ((cfg.sample_dt / cfg.sim_dt).round() as usize).max(1);
    let max_steps = (cfg.max_sim_time / cfg.sim_dt).ceil() as usize;

    let mut x = initial_state(spec, cfg);
    let mut active: Option<ActivePlan> = None;
    let mut pending: Option<(ActivePlan, f64)> = None;
    let mut plan_counter: i64 = 0;

    let mut samples = Vec::new();
    let mut replans = Vec::new();
    let mut min_clearance = f64::INFINITY;
    let mut peak_aoa: Vec<(String, f64)> =
        cfg.truth_params.surfaces.iter().map(|s| (s.name.clone(), 0.0)).collect();

    let mut outcome = RunOutcome::Timeout;
    let mut end_time = cfg.max_sim_time;

    for i in 0..=max_steps {
        let t = i as f64 * cfg.sim_dt;

        if let Some((_, at)) = &pending {
            if t + 1e-12 >= *at {
                let (plan, _) = pending.take().unwrap();
                active = Some(plan);
            }
        }

        if i % steps_per_replan == 0 && i < max_steps {
            let started = Instant::now();
            let prev = pending.as_ref().map(|(p, _)| p).or(active.as_ref());
            let (record, new_plan) =
                replan(&field, spec, cfg, &bounds, &f, &x, t, prev, plan_counter);
            let solve_time = started.elapsed().as_secs_f64();
            if let Some(plan) = new_plan {
                plan_counter += 1;
                let active_from = match cfg.mode {
                    TimingMode::Lockstep => t,
                    TimingMode::Realtime => t + solve_time,
                };
                let mut record = record;
                record.active_from = active_from;
                if cfg.mode == TimingMode::Realtime {
                    record.solve_time = solve_time;
                }
                replans.push(record);
                if active_from <= t {
                    active = Some(plan);
                    pending = None;
                } else {
                    pending = Some((plan, active_from));
                }
            } else {
                replans.push(record);
            }
        }

        let u = match &active {
            Some(plan) => plan.input(t, &x, &bounds),
            None => InputVec::zeros(),
        };

        let pos = Vector3::new(x[0], x[1], x[2]);
        let clearance = field.min_distance(&pos);
        min_clearance = min_clearance.min(clearance);
        let goal_distance = (pos - spec.goal).norm();

        if i % steps_per_sample == 0 {
            let aoas = surface_aoas(&x, &u, &cfg.truth_params);
            for (slot, a) in peak_aoa.iter_mut().zip(&aoas) {
                slot.1 = slot.1.max(*a);
            }
            samples.push(Sample {
                t,
                state: x,
                input: u,
                plan_id: active.as_ref().map(|p| p.id).unwrap_or(-1),
                clearance,
                wing_aoa: aoas
                    .iter()
                    .zip(&cfg.truth_params.surfaces)
                    .find(|(_, s)| s.name == "wing")
                    .map(|(a, _)| *a)
                    .unwrap_or(0.0),
            });
        }

        if goal_distance <= cfg.goal_tol {
            outcome = RunOutcome::ReachedGoal;
            end_time = t;
            break;
        }
        if clearance < cfg.hard_radius {
            outcome = RunOutcome::Collided;
            end_time = t;
            break;
        }
        let speed = Vector3::new(x[11], x[12], x[13]).norm();
        if !x.iter().all(|v| v.is_finite()) || speed > 30.0 || clearance == 0.0 {
            outcome = RunOutcome::Diverged;
            end_time = t;
            break;
        }
        if i == max_steps {
            break;
        }

        match rk4_step(&x, &u, cfg.sim_dt, &cfg.truth_params) {
            Ok(next) => {
                x = next;
                clamp_actuators(&mut x, &bounds);
            }
            Err(_) => {
                outcome = RunOutcome::Diverged;
                end_time = t;
                break;
            }
        }
    }

    let pos = Vector3::new(x[0], x[1], x[2]);
    Ok(RunLog {
        outcome,
        samples,
        replans,
        min_clearance,
        peak_aoa,
        end_time,
        goal_distance: (pos - spec.goal).norm(),
    })
}

/// One replanning attempt from the current true state. Failures at any
/// stage return a record explaining why and leave the previous plan in
/// charge.
#[allow(clippy::too_many_arguments)]
fn replan<F>(
    field: &DistanceField,
    spec: &HallwaySpec,
    cfg: &RunConfig,
    bounds: &Bounds,
    f: &F,
    x: &StateVec,
    t: f64,
    prev: Option<&ActivePlan>,
    plan_id: i64,
) -> (ReplanRecord, Option<ActivePlan>)
where
    F: Fn(&StateVec, &InputVec) -> Result<StateVec, DynamicsError>,
{
    let fail = |note: String, report: Option<NlpReport>| {
        (
            ReplanRecord {
                t,
                plan_id,
                report,
                activated: false,
                active_from: t,
                solve_time: 0.0,
                note,
            },
            None,
        )
    };

    let pos = Vector3::new(x[0], x[1], x[2]);
    // Pin the start at the true state, clamped into the optimizer's
    // envelope so the pin box stays nonempty when the plant strays
    // outside it (mismatch can briefly exceed the model bounds).
    let mut x_init = *x;
    for i in 0..x_init.len() {
        x_init[i] = x_init[i].clamp(bounds.x_min[i], bounds.x_max[i]);
    }

    // Enforce the same clearance radius the corridor planner can actually
    // deliver: after a stretch of failed replans the craft may drift
    // closer to a wall than the planning radius, and demanding the full
    // radius at the near-start knots would be unsatisfiable.
    let margin = field.resolution * 0.5;
    let nlp_radius = cfg
        .planning_radius
        .min(field.min_distance(&pos) - margin)
        .min(field.min_distance(&spec.goal) - margin)
        .max(cfg.hard_radius);

    // Convergence depends on the corridor sample: an awkward path can
    // leave the optimizer stuck where a fresh draw converges quickly, so
    // on failure the solve is retried with a new corridor.
    let mut solution = None;
    let mut last_failure: Option<NlpReport> = None;
    let mut planner_error = None;
    for attempt in 0..3u64 {
        let path_seed = cfg
            .rng_seed
            .wrapping_add(0x100)
            .wrapping_mul(plan_id as u64 + 1)
            .wrapping_add(attempt.wrapping_mul(0xd1b54a32d192ed03));
        let tp = match plan_corridor(
            field,
            pos,
            spec.goal,
            cfg.planning_radius,
            cfg.kappa_max,
            cfg.v_max,
            cfg.kappa_gain,
            path_seed,
        ) {
            Ok(tp) => tp,
            Err(e) => {
                planner_error = Some(e);
                continue;
            }
        };

        let span = cfg
            .horizon
            .min(tp.total_time)
            .max(cfg.n_knots as f64 * bounds.h_min);
        // Keep the step from collapsing below half its nominal value:
        // shrinking the span is an easy way to cut defects that starves
        // the plan of look-ahead. The upper bound stays at the envelope
        // cap so the solve can stretch time when the endpoint box needs
        // it.
        let h_ref = span / cfg.n_knots as f64;
        let mut plan_bounds = *bounds;
        plan_bounds.h_min = (0.5 * h_ref).max(bounds.h_min);

        let mut seed = seed_from_path(&tp, 0.0, cfg.n_knots, span, &cfg.model_params, &plan_bounds);
        align_seed_yaw(&mut seed, x[5]);
        let x_final = seed.states[cfg.n_knots];

        // On the first attempt, seed from the previous plan where it
        // still covers the horizon: the tracked state sits near that
        // trajectory, so the re-solve usually converges in a few
        // iterations. The endpoint box stays on the fresh corridor so
        // the horizon keeps receding toward the goal.
        let use_prev = attempt == 0 && prev.is_some();
        if let (true, Some(p)) = (use_prev, prev) {
            let shift = t - p.t0;
            for k in 0..=cfg.n_knots {
                let tau = shift + k as f64 * h_ref;
                if tau <= p.trajectory.duration() + 1e-9 {
                    let (xs, us) = p.trajectory.sample(tau);
                    seed.states[k] = xs;
                    seed.inputs[k] = us;
                }
            }
        }
        seed.states[0] = x_init;

        let problem = NlpProblem {
            n: cfg.n_knots,
            method: cfg.method,
            bounds: plan_bounds,
            x_init,
            tol_init: NlpProblem::pin_tolerance(),
            x_final,
            tol_final: Bounds::endpoint_tolerance(),
            field: Some(field),
            radius: nlp_radius,
        };

        // Multipliers are never carried across replans: each cycle is a
        // different problem (fresh corridor, shifted horizon), and stale
        // inflated multipliers dominate the merit function and stall the
        // solve. Only the loose-to-pinned handoff below shares them.
        if use_prev {
            // Fast path: the previous-plan seed is already dynamically
            // consistent almost everywhere, so solve the pinned problem
            // directly.
            let sol = match solve(&problem, f, &seed, None, &cfg.solver) {
                Ok(s) => s,
                Err(e) => return fail(format!("optimizer rejected the problem: {e}"), None),
            };
            if sol.report.is_feasible() {
                solution = Some(sol);
                break;
            }
            last_failure = Some(sol.report);
            continue;
        }

        // Cold two-stage solve. A kinematic corridor seed pinned at the
        // true state leaves the optimizer creeping on the first segment,
        // so first converge with a loose start box, then pin the true
        // state and re-solve from the now dynamically consistent
        // trajectory. The loose box is kept small enough that the final
        // pin is a modest correction the dynamics can absorb within one
        // segment, but large enough to give the optimizer room to move.
        let loose = NlpProblem {
            tol_init: StateVec::from_column_slice(&[
                0.05, 0.05, 0.05, // position, m
                0.15, 0.15, 0.15, // attitude, rad
                0.3, 0.3, 0.3, 0.3, // surface deflections
                0.5, // thrust state, N
                0.4, 0.4, 0.4, // body velocity, m/s
                0.8, 0.8, 0.8, // body rates, rad/s
            ]),
            ..problem
        };
        let pre = match solve(&loose, f, &seed, None, &cfg.solver) {
            Ok(s) => s,
            Err(e) => return fail(format!("optimizer rejected the problem: {e}"), None),
        };
        if !pre.report.is_feasible() {
            last_failure = Some(pre.report);
            continue;
        }
        let mut pinned_seed = pre.trajectory.clone();
        pinned_seed.states[0] = x_init;
        let sol = match solve(&problem, f, &pinned_seed, Some(&pre.warm), &cfg.solver) {
            Ok(s) => s,
            Err(e) => return fail(format!("optimizer rejected the problem: {e}"), None),
        };
        if sol.report.is_feasible() {
            solution = Some(sol);
            break;
        }
        last_failure = Some(sol.report);
    }
    let Some(solution) = solution else {
        // Keep the old multipliers: the failed solves' estimates are not
        // trustworthy for the next problem.
        return match last_failure {
            Some(report) => {
                let note = format!(
                    "optimizer did not converge: max defect {:.2e}, clearance violation {:.2e}",
                    report.max_defect, report.max_clearance_violation
                );
                fail(note, Some(report))
            }
            None => fail(
                format!(
                    "seed planning failed: {}",
                    planner_error.unwrap_or_else(|| "no corridor".into())
                ),
                None,
            ),
        };
    };

    let policy = if cfg.feedback {
        match riccati_backward(
            &solution.trajectory,
            &cfg.model_params,
            &cfg.weights,
            cfg.grid_refinement,
            bounds.u_min,
            bounds.u_max,
        ) {
            Ok(p) => Some(p),
            Err(e) => {
                return fail(
                    format!("policy construction failed: {e}"),
                    Some(solution.report.clone()),
                )
            }
        }
    } else {
        None
    };

    let record = ReplanRecord {
        t,
        plan_id,
        report: Some(solution.report.clone()),
        activated: true,
        active_from: t,
        solve_time: 0.0,
        note: String::new(),
    };
    let plan = ActivePlan {
        id: plan_id,
        t0: t,
        trajectory: solution.trajectory,
        policy,
    };
    (record, Some(plan))
}

#[cfg(test)]
mod tests;
