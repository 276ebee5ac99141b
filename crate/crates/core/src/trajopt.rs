//! Direct-transcription feasibility trajectory optimization.
//!
//! The NLP has no running cost: it searches for knot states, knot inputs,
//! and a common interval length `h` such that collocation defects vanish,
//! endpoint boxes hold, and every knot keeps a clearance radius from the
//! obstacle set. Solved with an augmented-Lagrangian outer loop around a
//! damped Gauss-Newton inner loop with projection onto the variable box.

use nalgebra::{DMatrix, DVector, SMatrix};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::environment::DistanceField;
use crate::state::{InputVec, StateVec, INPUT_DIM, STATE_DIM};

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum TrajoptError {
    #[error("dynamics evaluation failed on the initial guess: {0}")]
    SeedDynamics(DynamicsError),
    #[error("problem sizes or bounds are inconsistent")]
    BadProblem,
}

/// Collocation scheme for the dynamics defects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transcription {
    /// Third-order Hermite interpolant, Simpson quadrature.
    HermiteSimpson,
    /// First-order forward step.
    Euler,
}

/// Discrete trajectory: `n + 1` knot states and inputs on a uniform grid
/// of spacing `h` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StateVec>,
    pub inputs: Vec<InputVec>,
    pub h: f64,
}

impl Trajectory {
    pub fn n_intervals(&self) -> usize {
        self.states.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.h * self.n_intervals() as f64
    }

    /// Flatten into the decision vector `[x_0..x_N, u_0..u_N, h]`.
    pub fn pack(&self) -> DVector<f64> {
        let n1 = self.states.len();
        let mut z = DVector::zeros(n1 * (STATE_DIM + INPUT_DIM) + 1);
        for (k, x) in self.states.iter().enumerate() {
            z.rows_mut(k * STATE_DIM, STATE_DIM).copy_from(x);
        }
        let u0 = n1 * STATE_DIM;
        for (k, u) in self.inputs.iter().enumerate() {
            z.rows_mut(u0 + k * INPUT_DIM, INPUT_DIM).copy_from(u);
        }
        z[n1 * (STATE_DIM + INPUT_DIM)] = self.h;
        z
    }

    /// Rebuild from a decision vector with `n` intervals.
    pub fn unpack(n: usize, z: &DVector<f64>) -> Self {
        let n1 = n + 1;
        assert_eq!(z.len(), n1 * (STATE_DIM + INPUT_DIM) + 1);
        let states = (0..n1)
            .map(|k| StateVec::from_iterator(z.rows(k * STATE_DIM, STATE_DIM).iter().copied()))
            .collect();
        let u0 = n1 * STATE_DIM;
        let inputs = (0..n1)
            .map(|k| {
                InputVec::from_iterator(z.rows(u0 + k * INPUT_DIM, INPUT_DIM).iter().copied())
            })
            .collect();
        Self {
            states,
            inputs,
            h: z[n1 * (STATE_DIM + INPUT_DIM)],
        }
    }

    /// State and input at time `t` by linear interpolation between knots,
    /// clamped to the trajectory span.
    pub fn sample(&self, t: f64) -> (StateVec, InputVec) {
        let n = self.n_intervals();
        let s = (t / self.h).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        let w = s - k as f64;
        (
            self.states[k] * (1.0 - w) + self.states[k + 1] * w,
            self.inputs[k] * (1.0 - w) + self.inputs[k + 1] * w,
        )
    }
}

/// Per-variable box bounds shared by every knot, plus the interval bounds.
#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub x_min: StateVec,
    pub x_max: StateVec,
    pub u_min: InputVec,
    pub u_max: InputVec,
    pub h_min: f64,
    pub h_max: f64,
}

impl Bounds {
    /// Generous flight envelope for indoor aerobatic flight.
    pub fn flight_envelope() -> Self {
        let mut x_min = StateVec::zeros();
        let mut x_max = StateVec::zeros();
        for i in 0..3 {
            x_min[i] = -50.0;
            x_max[i] = 50.0;
        }
        // roll, pitch (inside the gimbal-safe band), yaw (unwrapped).
        x_min[3] = -std::f64::consts::PI;
        x_max[3] = std::f64::consts::PI;
        x_min[4] = -1.4;
        x_max[4] = 1.4;
        x_min[5] = -4.0 * std::f64::consts::PI;
        x_max[5] = 4.0 * std::f64::consts::PI;
        for i in 6..10 {
            x_min[i] = -1.0;
            x_max[i] = 1.0;
        }
        x_min[10] = 0.0;
        x_max[10] = 2.0; // thrust, N
        for i in 11..14 {
            x_min[i] = -12.0;
            x_max[i] = 12.0;
        }
        for i in 14..17 {
            x_min[i] = -15.0;
            x_max[i] = 15.0;
        }
        let mut u_min = InputVec::from_element(-10.0);
        let mut u_max = InputVec::from_element(10.0);
        u_min[4] = 0.0;
        u_max[4] = 1.0;
        Self {
            x_min,
            x_max,
            u_min,
            u_max,
            h_min: 0.02,
            h_max: 0.3,
        }
    }

    /// Component-wise terminal box half-widths for trajectory-following
    /// goals: tight on position, loose on attitude, free on actuator
    /// states, moderate on velocity and body rates.
    pub fn endpoint_tolerance() -> StateVec {
        StateVec::from_column_slice(&[
            0.1, 0.1, 0.2, // position, m
            0.5, 1.0, 0.2, // roll, pitch, yaw, rad
            100.0, 100.0, 100.0, 100.0, // surface deflections: free
            100.0, // thrust: free
            3.0, 3.0, 0.5, // body velocity, m/s
            2.0, 2.0, 2.0, // body rates, rad/s
        ])
    }

    /// Per-dimension state scale `(x_max - x_min) / 2` used to normalize
    /// defect rows and tolerances.
    pub fn state_scale(&self) -> StateVec {
        let mut s = StateVec::zeros();
        for i in 0..STATE_DIM {
            s[i] = 0.5 * (self.x_max[i] - self.x_min[i]);
            assert!(s[i] > 0.0, "degenerate bound on state dim {i}");
        }
        s
    }
}

/// Feasibility problem description. Endpoint conditions are boxes
/// `|x_0 - x_init| <= tol_init` and `|x_N - x_final| <= tol_final`
/// (component-wise), intersected with the global bounds.
#[derive(Clone)]
pub struct NlpProblem<'a> {
    pub n: usize,
    pub method: Transcription,
    pub bounds: Bounds,
    pub x_init: StateVec,
    pub tol_init: StateVec,
    pub x_final: StateVec,
    pub tol_final: StateVec,
    /// Obstacle clearance constraints at the knots when present.
    pub field: Option<&'a DistanceField>,
    /// Clearance radius, m.
    pub radius: f64,
}

impl NlpProblem<'_> {
    /// Tight initial box used when the start state is fully pinned.
    pub fn pin_tolerance() -> StateVec {
        StateVec::from_element(1e-6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// All defects within tolerance, all clearances satisfied.
    Feasible,
    /// Iteration budget exhausted before the tolerances were met.
    IterationLimit,
    /// The subproblem stalled making no progress.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct NlpReport {
    pub status: SolveStatus,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Largest scaled defect component at the final iterate.
    pub max_defect: f64,
    /// Largest clearance violation at the final iterate, m.
    pub max_clearance_violation: f64,
    pub warm_started: bool,
}

impl NlpReport {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }
}

/// Multiplier estimates carried between successive solves of the same
/// (slightly perturbed) problem.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub lambda: DVector<f64>,
    pub sigma: DVector<f64>,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub report: NlpReport,
    pub warm: WarmStart,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Feasibility tolerance on scaled defect components.
    pub tol_defect: f64,
    /// Feasibility tolerance on clearance violations, m.
    pub tol_cons: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Initial penalty weight.
    pub mu0: f64,
    /// Penalty growth when an outer pass fails to cut the violation.
    pub mu_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_defect: 1e-4,
            tol_cons: 1e-6,
            max_outer: 15,
            max_inner: 60,
            mu0: 10.0,
            mu_scale: 5.0,
        }
    }
}

pub type AMat = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type BMat = SMatrix<f64, STATE_DIM, INPUT_DIM>;

/// Hermite-Simpson collocation defect for one interval.
pub fn hermite_simpson_defect<F>(
    f: &F,
    x_k: &StateVec,
    u_k: &InputVec,
    x_k1: &StateVec,
    u_k1: &InputVec,
    h: f64,
) -> Result<StateVec, DynamicsError>
where
    F: Fn(&StateVec, &InputVec) -> Result<StateVec, DynamicsError>,
{
    let f_k = f(x_k, u_k)?;
    let f_k1 = f(x_k1, u_k1)?;
    let x_c = (x_k + x_k1) * 0.5 + (f_k - f_k1) * (h / 8.0);
    let u_c = (u_k + u_k1) * 0.5;
    let f_c = f(&x_c, &u_c)?;
    Ok(x_k - x_k1 + (f_k + f_c * 4.0 + f_k1) * (h / 6.0))
}

/// Forward-Euler defect for one interval.
pub fn euler_defect<F>(
    f: &F,
    x_k: &StateVec,
    u_k: &InputVec,
    x_k1: &StateVec,
    h: f64,
) -> Result<StateVec, DynamicsError>
where
    F: Fn(&StateVec, &InputVec) -> Result<StateVec, DynamicsError>,
{
    Ok(x_k + f(x_k, u_k)? * h - x_k1)
}

/// Central-difference linearization of an arbitrary dynamics closure.
fn fd_linearize<F>(f: &F, x: &StateVec, u: &InputVec) -> Result<(AMat, BMat), DynamicsError>
where
    F: Fn(&StateVec, &InputVec) -> Result<StateVec, DynamicsError>,
{
    let mut a = AMat::zeros();
    let mut b = BMat::zeros();
    for i in 0..STATE_DIM {
        let e = 1e-6 * (1.0 + x[i].abs());
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += e;
        xm[i] -= e;
        let d = (f(&xp, u)? - f(&xm, u)?) / (2.0 * e);
        a.set_column(i, &d);
    }
    for i in 0..INPUT_DIM {
        let e = 1e-6 * (1.0 + u[i].abs());
        let mut up = *u;
        let mut um = *u;
        up[i] += e;
        um[i] -= e;
        let d = (f(x, &up)? - f(x, &um)?) / (2.0 * e);
        b.set_column(i, &d);
    }
    Ok((a, b))
}

/// Jacobian blocks of the defect with respect to
/// `(x_k, u_k, x_k1, u_k1, h)`, assembled by the chain rule from the
/// dynamics linearizations.
struct DefectJac {
    dx_k: AMat,
    dx_k1: AMat,
    du_k: BMat,
    du_k1: BMat,
    dh: StateVec,
}

fn defect_with_jacobian<F>(
    method: Transcription,
    f: &F,
    x_k: &StateVec,
    u_k: &InputVec,
    x_k1: &StateVec,
    u_k1: &InputVec,
    h: f64,
) -> Result<DefectJac, DynamicsError>
where
    F: Fn(&StateVec, &InputVec) -> Result<StateVec, DynamicsError>,
{
    let id = AMat::identity();
    match method {
        Transcription::Euler => {
            let f_k = f(x_k, u_k)?;
            let (a_k, b_k) = fd_linearize(f, x_k, u_k)?;
            Ok(DefectJac {
                dx_k: id + a_k * h,
                dx_k1: -id,
                du_k: b_k * h,
                du_k1: BMat::zeros(),
                dh: f_k,
            })
        }
        Transcription::HermiteSimpson => {
            let f_k = f(x_k, u_k)?;
            let f_k1 = f(x_k1, u_k1)?;
            let x_c = (x_k + x_k1) * 0.5 + (f_k - f_k1) * (h / 8.0);
            let u_c = (u_k + u_k1) * 0.5;
            let f_c = f(&x_c, &u_c)?;
            let (a_k, b_k) = fd_linearize(f, x_k, u_k)?;
            let (a_k1, b_k1) = fd_linearize(f, x_k1, u_k1)?;
            let (a_c, b_c) = fd_linearize(f, &x_c, &u_c)?;
            // Chain rule through the interpolated midpoint.
            let xc_dxk = id * 0.5 + a_k * (h / 8.0);
            let xc_dxk1 = id * 0.5 - a_k1 * (h / 8.0);
            let dx_k = id + (a_k + (a_c * xc_dxk) * 4.0) * (h / 6.0);
            let dx_k1 = -id + (a_k1 + (a_c * xc_dxk1) * 4.0) * (h / 6.0);
            let du_k = (b_k + (a_c * b_k * (h / 8.0) + b_c * 0.5) * 4.0) * (h / 6.0);
            let du_k1 = (b_k1 + (a_c * b_k1 * (-h / 8.0) + b_c * 0.5) * 4.0) * (h / 6.0);
            let dh = (f_k + f_c * 4.0 + f_k1) / 6.0 + a_c * (f_k - f_k1) * (4.0 * h / 48.0);
            Ok(DefectJac {
                dx_k,
                dx_k1,
                du_k,
                du_k1,
                dh,
            })
        }
    }
}

/// Variable box for the full decision vector, including the tightened
/// endpoint boxes.
fn variable_box(p: &NlpProblem) -> (DVector<f64>, DVector<f64>) {
    let n1 = p.n + 1;
    let n_vars = n1 * (STATE_DIM + INPUT_DIM) + 1;
    let mut lb = DVector::zeros(n_vars);
    let mut ub = DVector::zeros(n_vars);
    for k in 0..n1 {
        for i in 0..STATE_DIM {
            let (mut lo, mut hi) = (p.bounds.x_min[i], p.bounds.x_max[i]);
            if k == 0 {
                lo = lo.max(p.x_init[i] - p.tol_init[i]);
                hi = hi.min(p.x_init[i] + p.tol_init[i]);
            }
            if k == p.n {
                lo = lo.max(p.x_final[i] - p.tol_final[i]);
                hi = hi.min(p.x_final[i] + p.tol_final[i]);
            }
            lb[k * STATE_DIM + i] = lo;
            ub[k * STATE_DIM + i] = hi;
        }
        let u0 = n1 * STATE_DIM;
        for i in 0..INPUT_DIM {
            lb[u0 + k * INPUT_DIM + i] = p.bounds.u_min[i];
            ub[u0 + k * INPUT_DIM + i] = p.bounds.u_max[i];
        }
    }
    lb[n_vars - 1] = p.bounds.h_min;
    ub[n_vars - 1] = p.bounds.h_max;
    (lb, ub)
}

fn project(z: &mut DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>) {
    for i in 0..z.len() {
        z[i] = z[i].clamp(lb[i], ub[i]);
    }
}

/// All constraint values at a decision vector: scaled defects (equality)
/// followed by clearance violations `radius - d(r_k)` (inequality, <= 0).
///
/// Defect rows are divided by `h` as well as the state scale. The raw
/// defect grows linearly with the interval length, so without this the
/// solver can cheat the residual down by collapsing `h` to its lower
/// bound; the normalized form is the average slope error and leaves no
/// such incentive. Feasibility is still judged on the raw scaled defect
/// (`|c| * h`).
fn constraints<F>(
    p: &NlpProblem,
    f: &F,
    traj: &Trajectory,
    scale: &StateVec,
) -> Result<(DVector<f64>, DVector<f64>), DynamicsError>
where
    F: Fn(&StateVec, &InputVec) -> Result<StateVec, DynamicsError>,
{
    let mut c = DVector::zeros(p.n * STATE_DIM);
    for k in 0..p.n {
        let d = match p.method {
            Transcription::HermiteSimpson => hermite_simpson_defect(
                f,
                &traj.states[k],
                &traj.inputs[k],
                &traj.states[k + 1],
                &traj.inputs[k + 1],
                traj.h,
            )?,
            Transcription::Euler => euler_defect(
                f,
                &traj.states[k],
                &traj.inputs[k],
                &traj.states[k + 1],
                traj.h,
            )?,
        };
        for i in 0..STATE_DIM {
            c[k * STATE_DIM + i] = d[i] / (scale[i] * traj.h);
        }
    }
    let g = match p.field {
        Some(field) => DVector::from_iterator(
            p.n + 1,
            traj.states.iter().enumerate().map(|(k, x)| {
                // A pinned knot's position is not a decision: demanding
                // clearance there is either vacuous or unsatisfiable
                // (e.g. replanning from a pose legitimately closer to a
                // wall than the planning radius), and an unsatisfiable
                // constraint poisons the multiplier loop. Exempt it.
                if knot_is_pinned(p, k) {
                    return -1.0;
                }
                let r = nalgebra::Vector3::new(x[0], x[1], x[2]);
                p.radius - field.signed_distance(&r)
            }),
        ),
        None => DVector::zeros(0),
    };
    Ok((c, g))
}

/// True when the endpoint box fixes the knot's position outright.
fn knot_is_pinned(p: &NlpProblem, k: usize) -> bool {
    let tol = if k == 0 {
        &p.tol_init
    } else if k == p.n {
        &p.tol_final
    } else {
        return false;
    };
    (0..3).all(|i| tol[i] <= 1e-5)
}

/// Augmented-Lagrangian residual squared norm (the Gauss-Newton merit).
fn merit(c: &DVector<f64>, g: &DVector<f64>, w: &WarmStart) -> f64 {
    let mut m = 0.0;
    for i in 0..c.len() {
        let r = (c[i] + w.lambda[i] / w.mu) * w.mu.sqrt();
        m += r * r;
    }
    for j in 0..g.len() {
        let r = (g[j] + w.sigma[j] / w.mu).max(0.0) * w.mu.sqrt();
        m += r * r;
    }
    0.5 * m
}

/// Worst raw scaled defect (`|c| * h`, undoing the slope normalization)
/// and worst clearance violation.
fn violation(c: &DVector<f64>, g: &DVector<f64>, h: f64) -> (f64, f64) {
    let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs())) * h;
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(*v));
    (cmax, gmax)
}

/// Solve the feasibility NLP from an initial guess. `warm` reuses
/// multiplier estimates from a previous solve of a nearby problem.
pub fn solve<F>(
    p: &NlpProblem,
    f: &F,
    seed: &Trajectory,
    warm: Option<&WarmStart>,
    cfg: &SolverConfig,
) -> Result<Solution, TrajoptError>
where
    F: Fn(&StateVec, &InputVec) -> Result<StateVec, DynamicsError>,
{
    if seed.states.len() != p.n + 1 || seed.inputs.len() != p.n + 1 || p.n == 0 {
        return Err(TrajoptError::BadProblem);
    }
    let scale = p.bounds.state_scale();
    let (lb, ub) = variable_box(p);
    for i in 0..lb.len() {
        if lb[i] > ub[i] {
            return Err(TrajoptError::BadProblem);
        }
    }
    let n_eq = p.n * STATE_DIM;
    let n_in = if p.field.is_some() { p.n + 1 } else { 0 };
    let n_vars = lb.len();

    let mut z = seed.pack();
    project(&mut z, &lb, &ub);
    let mut traj = Trajectory::unpack(p.n, &z);

    let warm_started = warm.is_some();
    let mut w = match warm {
        Some(w) if w.lambda.len() == n_eq && w.sigma.len() == n_in => w.clone(),
        Some(_) => return Err(TrajoptError::BadProblem),
        None => WarmStart {
            lambda: DVector::zeros(n_eq),
            sigma: DVector::zeros(n_in),
            mu: cfg.mu0,
        },
    };

    let (mut c, mut g) =
        constraints(p, f, &traj, &scale).map_err(TrajoptError::SeedDynamics)?;
    let mut inner_total = 0usize;
    let mut outer_done = 0usize;
    let mut prev_viol = f64::INFINITY;
    let mut status = SolveStatus::IterationLimit;

    'outer: for outer in 0..cfg.max_outer {
        outer_done = outer + 1;
        let mut phi = merit(&c, &g, &w);
        let mut inner_converged = false;
        // The multiplier update changes the merit landscape, so damping
        // accumulated against the previous subproblem is meaningless;
        // start each subproblem from mild damping.
        let mut nu = 1e-4;

        for _ in 0..cfg.max_inner {
            let (cmax, gmax) = violation(&c, &g, traj.h);
            if cmax <= cfg.tol_defect && gmax <= cfg.tol_cons {
                status = SolveStatus::Feasible;
                break 'outer;
            }
            inner_total += 1;

            // Assemble the active residual and its Jacobian.
            let sqmu = w.mu.sqrt();
            let mut r = DVector::zeros(n_eq + n_in);
            let mut jac = DMatrix::zeros(n_eq + n_in, n_vars);
            let u_off = (p.n + 1) * STATE_DIM;
            let h_col = n_vars - 1;
            let mut jac_err = false;
            for k in 0..p.n {
                let dj = match defect_with_jacobian(
                    p.method,
                    f,
                    &traj.states[k],
                    &traj.inputs[k],
                    &traj.states[k + 1],
                    &traj.inputs[k + 1],
                    traj.h,
                ) {
                    Ok(dj) => dj,
                    Err(_) => {
                        jac_err = true;
                        break;
                    }
                };
                for i in 0..STATE_DIM {
                    let row = k * STATE_DIM + i;
                    let si = sqmu / (scale[i] * traj.h);
                    r[row] = (c[row] + w.lambda[row] / w.mu) * sqmu;
                    for jcol in 0..STATE_DIM {
                        jac[(row, k * STATE_DIM + jcol)] = dj.dx_k[(i, jcol)] * si;
                        jac[(row, (k + 1) * STATE_DIM + jcol)] = dj.dx_k1[(i, jcol)] * si;
                    }
                    for jcol in 0..INPUT_DIM {
                        jac[(row, u_off + k * INPUT_DIM + jcol)] = dj.du_k[(i, jcol)] * si;
                        jac[(row, u_off + (k + 1) * INPUT_DIM + jcol)] =
                            dj.du_k1[(i, jcol)] * si;
                    }
                    // Product rule through the slope normalization 1/h.
                    jac[(row, h_col)] = dj.dh[i] * si - c[row] / traj.h * sqmu;
                }
            }
            if jac_err {
                status = SolveStatus::Stalled;
                break 'outer;
            }
            if let Some(field) = p.field {
                for k in 0..=p.n {
                    let row = n_eq + k;
                    let active = g[k] + w.sigma[k] / w.mu;
                    if active > 0.0 {
                        r[row] = active * sqmu;
                        let x = &traj.states[k];
                        let grad =
                            field.signed_gradient(&nalgebra::Vector3::new(x[0], x[1], x[2]));
                        for a in 0..3 {
                            jac[(row, k * STATE_DIM + a)] = -grad[a] * sqmu;
                        }
                    }
                }
            }

            // Damped Gauss-Newton step restricted to the free variables:
            // variables sitting on a bound with the gradient pushing
            // outward are frozen so projection cannot mangle the coupled
            // step. Damping is scaled per column (Marquardt style) so
            // variables of very different magnitudes - positions, angles,
            // the interval length - shrink proportionally.
            let grad = jac.transpose() * &r;
            let free: Vec<usize> = (0..n_vars)
                .filter(|&i| {
                    let span = ub[i] - lb[i];
                    if span < 1e-12 {
                        return false;
                    }
                    let eps = 1e-9 * span.min(1.0);
                    if z[i] <= lb[i] + eps && grad[i] > 0.0 {
                        return false;
                    }
                    if z[i] >= ub[i] - eps && grad[i] < 0.0 {
                        return false;
                    }
                    true
                })
                .collect();
            if free.is_empty() {
                break;
            }
            let jac_f = jac.select_columns(free.iter());
            let jtj = jac_f.transpose() * &jac_f;
            let jtr_f = jac_f.transpose() * &r;
            let diag_floor = jtj.diagonal().max() * 1e-10 + 1e-12;
            let mut improved = false;
            for _damp in 0..10 {
                let mut lhs = jtj.clone();
                for i in 0..free.len() {
                    lhs[(i, i)] += nu * lhs[(i, i)].max(diag_floor);
                }
                let step_f = match lhs.cholesky() {
                    Some(ch) => ch.solve(&(-&jtr_f)),
                    None => {
                        nu *= 10.0;
                        continue;
                    }
                };
                let mut step = DVector::zeros(n_vars);
                for (sf, &i) in step_f.iter().zip(free.iter()) {
                    step[i] = *sf;
                }
                let mut alpha = 1.0;
                for _ls in 0..12 {
                    let mut z_try = &z + &step * alpha;
                    project(&mut z_try, &lb, &ub);
                    let traj_try = Trajectory::unpack(p.n, &z_try);
                    if let Ok((c_try, g_try)) = constraints(p, f, &traj_try, &scale) {
                        let phi_try = merit(&c_try, &g_try, &w);
                        if phi_try < phi * (1.0 - 1e-9) {
                            z = z_try;
                            traj = traj_try;
                            c = c_try;
                            g = g_try;
                            phi = phi_try;
                            improved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if improved {
                    nu = (nu * 0.3).max(1e-10);
                    break;
                }
                nu *= 10.0;
            }
            if std::env::var_os("TRAJOPT_DEBUG").is_some() {
                let (cm, gm) = violation(&c, &g, traj.h);
                let arg = (0..c.len()).max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()));
                eprintln!(
                    "outer {outer} inner {inner_total}: phi={phi:.6e} cmax={cm:.3e} gmax={gm:.3e} nu={nu:.1e} improved={improved} h={:.4} argmax={:?}",
                    traj.h,
                    arg.map(|i| (i / STATE_DIM, i % STATE_DIM))
                );
            }
            if !improved {
                // Stationary point of the subproblem (to within the
                // damping ladder): safe to update the multipliers.
                inner_converged = true;
                break;
            }
        }

        let (cmax, gmax) = violation(&c, &g, traj.h);
        let viol = cmax.max(gmax);
        if cmax <= cfg.tol_defect && gmax <= cfg.tol_cons {
            status = SolveStatus::Feasible;
            break;
        }
        if inner_converged {
            // First-order multiplier updates, valid only at a subproblem
            // minimizer; tighten the penalty when the violation stalls.
            for i in 0..n_eq {
                w.lambda[i] += w.mu * c[i];
            }
            for j in 0..n_in {
                w.sigma[j] = (w.sigma[j] + w.mu * g[j]).max(0.0);
            }
            if viol > 0.5 * prev_viol {
                w.mu *= cfg.mu_scale;
            }
        } else {
            // Iteration budget ran out mid-descent: keep multipliers and
            // grow the penalty mildly so the next pass pushes harder.
            w.mu *= 2.0;
        }
        prev_viol = prev_viol.min(viol);
    }

    let (cmax, gmax) = violation(&c, &g, traj.h);
    if cmax <= cfg.tol_defect && gmax <= cfg.tol_cons {
        status = SolveStatus::Feasible;
    }
    Ok(Solution {
        trajectory: traj,
        report: NlpReport {
            status,
            outer_iterations: outer_done,
            inner_iterations: inner_total,
            max_defect: cmax,
            max_clearance_violation: gmax.max(0.0),
            warm_started,
        },
        warm: w,
    })
}

/// Build an aircraft trajectory guess from a time-parametrized path
/// covering `span` seconds: positions and speeds sampled at the knot
/// times, yaw aligned with (and unwrapped along) the path tangent, zero
/// roll, pitch from the tangent climb angle, and a constant thrust guess
/// held by the matching steady throttle.
pub fn seed_from_path(
    tp: &crate::planner::TimeParamPath,
    t0: f64,
    n: usize,
    span: f64,
    params: &crate::params::AircraftParams,
    bounds: &Bounds,
) -> Trajectory {
    assert!(n > 0 && span > 0.0);
    let h = (span / n as f64).clamp(bounds.h_min, bounds.h_max);
    let thrust = 0.3 * params.mass * params.gravity;
    let throttle = (-params.thrust_a / params.thrust_b * thrust).clamp(0.0, 1.0);
    let mut states = Vec::with_capacity(n + 1);
    let mut prev_yaw = 0.0f64;
    let mut yaws = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = t0 + h * k as f64;
        let (pos, tangent, speed) = tp.sample(t);
        let mut yaw = tangent[1].atan2(tangent[0]);
        if k > 0 {
            // Unwrap so consecutive knots never jump across +-pi.
            while yaw - prev_yaw > std::f64::consts::PI {
                yaw -= 2.0 * std::f64::consts::PI;
            }
            while yaw - prev_yaw < -std::f64::consts::PI {
                yaw += 2.0 * std::f64::consts::PI;
            }
        }
        prev_yaw = yaw;
        yaws.push(yaw);
        let pitch = (-tangent[2]).asin().clamp(bounds.x_min[4], bounds.x_max[4]);
        let theta = nalgebra::Vector3::new(0.0, pitch, yaw);
        let v_body = crate::dynamics::euler_to_rotation(&theta).transpose() * (tangent * speed);
        let mut x = StateVec::zeros();
        for i in 0..3 {
            x[i] = pos[i];
            x[3 + i] = theta[i];
            x[11 + i] = v_body[i];
        }
        x[10] = thrust;
        states.push(x);
    }
    // Body rates from the yaw-rate finite differences.
    for k in 0..=n {
        let yaw_rate = if k == 0 {
            (yaws[1] - yaws[0]) / h
        } else if k == n {
            (yaws[n] - yaws[n - 1]) / h
        } else {
            (yaws[k + 1] - yaws[k - 1]) / (2.0 * h)
        };
        let theta = nalgebra::Vector3::new(states[k][3], states[k][4], states[k][5]);
        let omega = crate::dynamics::euler_rates_to_omega(
            &theta,
            &nalgebra::Vector3::new(0.0, 0.0, yaw_rate),
        );
        for i in 0..3 {
            states[k][14 + i] = omega[i];
        }
    }
    let mut u = InputVec::zeros();
    u[4] = throttle;
    Trajectory {
        states,
        inputs: vec![u; n + 1],
        h,
    }
}

/// Independent feasibility check of a finished trajectory: recomputes
/// every defect and clearance from scratch.
pub fn certify<F>(
    p: &NlpProblem,
    f: &F,
    traj: &Trajectory,
    cfg: &SolverConfig,
) -> Result<bool, DynamicsError>
where
    F: Fn(&StateVec, &InputVec) -> Result<StateVec, DynamicsError>,
{
    let scale = p.bounds.state_scale();
    let (c, g) = constraints(p, f, traj, &scale)?;
    let (cmax, gmax) = violation(&c, &g, traj.h);
    let (lb, ub) = variable_box(p);
    let z = traj.pack();
    let in_box = (0..z.len()).all(|i| z[i] >= lb[i] - 1e-9 && z[i] <= ub[i] + 1e-9);
    Ok(cmax <= cfg.tol_defect && gmax <= cfg.tol_cons && in_box)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::state_derivative_vec;
    use crate::params::AircraftParams;
    use crate::state::{AircraftState, ControlInput};
    use nalgebra::Vector3;

    type Dyn = fn(&StateVec, &InputVec) -> Result<StateVec, DynamicsError>;

    /// Clock-plus-quartic: dx0 = 1, dx1 = 4 x0^3, all other dims frozen.
    fn quartic_clock(x: &StateVec, _u: &InputVec) -> Result<StateVec, DynamicsError> {
        let mut d = StateVec::zeros();
        d[0] = 1.0;
        d[1] = 4.0 * x[0].powi(3);
        Ok(d)
    }

    /// Scalar exponential growth in dim 0.
    fn exponential(x: &StateVec, _u: &InputVec) -> Result<StateVec, DynamicsError> {
        let mut d = StateVec::zeros();
        d[0] = x[0];
        Ok(d)
    }

    /// Double integrator: position dims 0..3, velocity dims 11..14 driven
    /// by the first three inputs as accelerations.
    fn double_integrator(x: &StateVec, u: &InputVec) -> Result<StateVec, DynamicsError> {
        let mut d = StateVec::zeros();
        for i in 0..3 {
            d[i] = x[11 + i];
            d[11 + i] = u[i];
        }
        Ok(d)
    }

    #[test]
    fn pack_unpack_round_trips() {
        let traj = Trajectory {
            states: (0..4)
                .map(|k| StateVec::from_fn(|i, _| (k * 17 + i) as f64 * 0.1))
                .collect(),
            inputs: (0..4)
                .map(|k| InputVec::from_fn(|i, _| (k * 5 + i) as f64 * -0.2))
                .collect(),
            h: 0.123,
        };
        let z = traj.pack();
        assert_eq!(z.len(), 4 * 22 + 1);
        assert_eq!(Trajectory::unpack(3, &z), traj);
        // Known slots: first state component, first input component, h.
        assert_eq!(z[0], 0.0);
        assert_eq!(z[4 * 17], 0.0);
        assert_eq!(z[z.len() - 1], 0.123);
    }

    #[test]
    fn simpson_defect_is_exact_on_quartic_trajectories() {
        // x1(t) = t^4 has a cubic derivative; Simpson quadrature and the
        // Hermite midpoint are both exact there, so the defect vanishes.
        let f: Dyn = quartic_clock;
        for &(t0, h) in &[(0.0, 0.1), (0.3, 0.25), (-1.0, 0.5)] {
            let mut x_k = StateVec::zeros();
            x_k[0] = t0;
            x_k[1] = t0.powi(4);
            let mut x_k1 = StateVec::zeros();
            x_k1[0] = t0 + h;
            x_k1[1] = (t0 + h).powi(4);
            let u = InputVec::zeros();
            let d = hermite_simpson_defect(&f, &x_k, &u, &x_k1, &u, h).unwrap();
            assert!(d.norm() < 1e-12, "defect {} at t0={t0}, h={h}", d.norm());
        }
    }

    #[test]
    fn euler_defect_matches_closed_form_on_exponential() {
        let f: Dyn = exponential;
        for &h in &[0.05f64, 0.1, 0.2] {
            let mut x_k = StateVec::zeros();
            x_k[0] = 1.0;
            let mut x_k1 = StateVec::zeros();
            x_k1[0] = h.exp();
            let u = InputVec::zeros();
            let d = euler_defect(&f, &x_k, &u, &x_k1, h).unwrap();
            // x + h*x - e^h exactly.
            assert!((d[0] - (1.0 + h - h.exp())).abs() < 1e-15);
            assert!(d.fixed_rows::<16>(1).norm() == 0.0);
        }
    }

    /// Integrate the aircraft dynamics with many small RK4 steps; serves
    /// as the reference solution for the defect-order tests.
    fn fine_rk4(
        x0: &StateVec,
        u: &InputVec,
        h: f64,
        steps: usize,
        params: &AircraftParams,
    ) -> StateVec {
        let mut x = *x0;
        let dt = h / steps as f64;
        for _ in 0..steps {
            let k1 = state_derivative_vec(&x, u, params).unwrap();
            let k2 = state_derivative_vec(&(x + k1 * (dt / 2.0)), u, params).unwrap();
            let k3 = state_derivative_vec(&(x + k2 * (dt / 2.0)), u, params).unwrap();
            let k4 = state_derivative_vec(&(x + k3 * dt), u, params).unwrap();
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        x
    }

    fn generic_flight_state() -> (StateVec, InputVec, AircraftParams) {
        let params = AircraftParams::edge540_24in();
        let s = AircraftState {
            r: Vector3::new(0.0, 0.0, -1.0),
            theta: Vector3::new(0.05, 0.3, -0.1),
            delta: nalgebra::Vector4::new(0.02, -0.02, 0.1, 0.0),
            delta_t: 0.8,
            v: Vector3::new(3.5, 0.2, 0.4),
            omega: Vector3::new(0.3, -0.2, 0.5),
        };
        let u = ControlInput {
            surface_rates: nalgebra::Vector4::new(0.5, -0.5, 0.2, 0.1),
            u_t: 0.4,
        };
        (s.to_vector(), u.to_vector(), params)
    }

    #[test]
    fn defect_orders_match_the_schemes() {
        // On the exact flow the Hermite-Simpson defect shrinks as h^5 and
        // the Euler defect as h^2: halving h scales them by ~32 and ~4.
        let (x0, u, params) = generic_flight_state();
        let f = |x: &StateVec, uu: &InputVec| state_derivative_vec(x, uu, &params);

        let defect_at = |h: f64, method: Transcription| -> f64 {
            let x1 = fine_rk4(&x0, &u, h, 4000, &params);
            match method {
                Transcription::HermiteSimpson => {
                    hermite_simpson_defect(&f, &x0, &u, &x1, &u, h).unwrap().norm()
                }
                Transcription::Euler => euler_defect(&f, &x0, &u, &x1, h).unwrap().norm(),
            }
        };

        let hs_ratio = defect_at(0.08, Transcription::HermiteSimpson)
            / defect_at(0.04, Transcription::HermiteSimpson);
        assert!(
            (20.0..48.0).contains(&hs_ratio),
            "Hermite-Simpson defect ratio {hs_ratio}, expected ~32"
        );

        let eu_ratio =
            defect_at(0.08, Transcription::Euler) / defect_at(0.04, Transcription::Euler);
        assert!(
            (3.4..4.6).contains(&eu_ratio),
            "Euler defect ratio {eu_ratio}, expected ~4"
        );
    }

    #[test]
    fn defect_jacobians_match_finite_differences() {
        let (x0, u0, params) = generic_flight_state();
        let f = |x: &StateVec, uu: &InputVec| state_derivative_vec(x, uu, &params);
        let x1 = fine_rk4(&x0, &u0, 0.1, 100, &params);
        let mut u1 = u0;
        u1[2] += 0.3;
        let h = 0.1;

        for method in [Transcription::HermiteSimpson, Transcription::Euler] {
            let dj = defect_with_jacobian(method, &f, &x0, &u0, &x1, &u1, h).unwrap();
            let defect = |xa: &StateVec, ua: &InputVec, xb: &StateVec, ub: &InputVec, hh: f64| {
                match method {
                    Transcription::HermiteSimpson => {
                        hermite_simpson_defect(&f, xa, ua, xb, ub, hh).unwrap()
                    }
                    Transcription::Euler => euler_defect(&f, xa, ua, xb, hh).unwrap(),
                }
            };
            let tol = 2e-5;
            for i in 0..STATE_DIM {
                let e = 1e-6 * (1.0 + x0[i].abs());
                let (mut xp, mut xm) = (x0, x0);
                xp[i] += e;
                xm[i] -= e;
                let col = (defect(&xp, &u0, &x1, &u1, h) - defect(&xm, &u0, &x1, &u1, h))
                    / (2.0 * e);
                assert!((dj.dx_k.column(i) - col).norm() < tol, "dx_k col {i}");
                let (mut xp, mut xm) = (x1, x1);
                xp[i] += e;
                xm[i] -= e;
                let col = (defect(&x0, &u0, &xp, &u1, h) - defect(&x0, &u0, &xm, &u1, h))
                    / (2.0 * e);
                assert!((dj.dx_k1.column(i) - col).norm() < tol, "dx_k1 col {i}");
            }
            for i in 0..INPUT_DIM {
                let e = 1e-6;
                let (mut up, mut um) = (u0, u0);
                up[i] += e;
                um[i] -= e;
                let col = (defect(&x0, &up, &x1, &u1, h) - defect(&x0, &um, &x1, &u1, h))
                    / (2.0 * e);
                assert!((dj.du_k.column(i) - col).norm() < tol, "du_k col {i}");
                let (mut up, mut um) = (u1, u1);
                up[i] += e;
                um[i] -= e;
                let col = (defect(&x0, &u0, &x1, &up, h) - defect(&x0, &u0, &x1, &um, h))
                    / (2.0 * e);
                assert!((dj.du_k1.column(i) - col).norm() < tol, "du_k1 col {i}");
            }
            let e = 1e-7;
            let col = (defect(&x0, &u0, &x1, &u1, h + e) - defect(&x0, &u0, &x1, &u1, h - e))
                / (2.0 * e);
            assert!((dj.dh - col).norm() < tol, "dh");
        }
    }

    fn wide_bounds() -> Bounds {
        let mut b = Bounds::flight_envelope();
        b.x_min = StateVec::from_element(-100.0);
        b.x_max = StateVec::from_element(100.0);
        b.u_min = InputVec::from_element(-100.0);
        b.u_max = InputVec::from_element(100.0);
        b.h_min = 0.01;
        b.h_max = 1.0;
        b
    }

    fn straight_seed(n: usize, h: f64) -> Trajectory {
        Trajectory {
            states: (0..=n).map(|_| StateVec::zeros()).collect(),
            inputs: (0..=n).map(|_| InputVec::zeros()).collect(),
            h,
        }
    }

    #[test]
    fn double_integrator_rest_to_rest_is_feasible_and_certified() {
        let f: Dyn = double_integrator;
        let mut x_final = StateVec::zeros();
        x_final[0] = 1.0; // move one meter in x, end at rest
        let mut tol_final = StateVec::from_element(100.0);
        for i in [0, 11, 12, 13] {
            tol_final[i] = 1e-3;
        }
        let p = NlpProblem {
            n: 10,
            method: Transcription::HermiteSimpson,
            bounds: wide_bounds(),
            x_init: StateVec::zeros(),
            tol_init: NlpProblem::pin_tolerance(),
            x_final,
            tol_final,
            field: None,
            radius: 0.0,
        };
        let cfg = SolverConfig::default();
        let sol = solve(&p, &f, &straight_seed(10, 0.1), None, &cfg).unwrap();
        assert_eq!(sol.report.status, SolveStatus::Feasible, "{:?}", sol.report);
        // Independent certificate, recomputed from scratch.
        assert!(certify(&p, &f, &sol.trajectory, &cfg).unwrap());
        // End state actually near the target.
        let xn = sol.trajectory.states[10];
        assert!((xn[0] - 1.0).abs() <= 1e-3 + 1e-9);
        assert!(xn[11].abs() <= 1e-3 + 1e-9);
    }

    #[test]
    fn euler_transcription_solves_the_same_reach_problem() {
        let f: Dyn = double_integrator;
        let mut x_final = StateVec::zeros();
        x_final[0] = 1.0;
        let mut tol_final = StateVec::from_element(100.0);
        tol_final[0] = 1e-3;
        let p = NlpProblem {
            n: 10,
            method: Transcription::Euler,
            bounds: wide_bounds(),
            x_init: StateVec::zeros(),
            tol_init: NlpProblem::pin_tolerance(),
            x_final,
            tol_final,
            field: None,
            radius: 0.0,
        };
        let cfg = SolverConfig::default();
        let sol = solve(&p, &f, &straight_seed(10, 0.1), None, &cfg).unwrap();
        assert_eq!(sol.report.status, SolveStatus::Feasible, "{:?}", sol.report);
        assert!(certify(&p, &f, &sol.trajectory, &cfg).unwrap());
    }

    #[test]
    fn clearance_constraint_pushes_knots_off_the_wall() {
        use crate::environment::{build_field, HallwaySpec};
        let spec = HallwaySpec::corner(1.75, 2.5, 4.0);
        let field = build_field(&spec, 0.05, 5.0).unwrap();
        let f: Dyn = double_integrator;

        // Straight line hugging the wall: start and end slightly inside
        // the corridor but the seed collides with the clearance radius.
        let radius = 0.55;
        let mut x_init = StateVec::zeros();
        x_init[0] = 0.0;
        x_init[1] = -0.6; // 0.275 m from the wall: violates the radius
        x_init[2] = -1.25;
        let mut x_final = x_init;
        x_final[0] = 3.0;
        let mut tol_pos = StateVec::from_element(100.0);
        for i in [1, 2] {
            tol_pos[i] = 0.8; // let the endpoints slide toward the center
        }
        tol_pos[0] = 1e-3;
        let p = NlpProblem {
            n: 8,
            method: Transcription::HermiteSimpson,
            bounds: wide_bounds(),
            x_init,
            tol_init: tol_pos,
            x_final,
            tol_final: tol_pos,
            field: Some(&field),
            radius,
        };
        let mut seed = straight_seed(8, 0.15);
        for (k, s) in seed.states.iter_mut().enumerate() {
            let w = k as f64 / 8.0;
            s[0] = 3.0 * w;
            s[1] = -0.6;
            s[2] = -1.25;
        }
        let cfg = SolverConfig::default();
        let sol = solve(&p, &f, &seed, None, &cfg).unwrap();
        assert_eq!(sol.report.status, SolveStatus::Feasible, "{:?}", sol.report);
        for s in &sol.trajectory.states {
            let d = field.min_distance(&Vector3::new(s[0], s[1], s[2]));
            assert!(
                d >= radius - cfg.tol_cons - 1e-9,
                "knot clearance {d} below {radius}"
            );
        }
    }

    #[test]
    fn warm_start_speeds_up_a_perturbed_resolve() {
        let f: Dyn = double_integrator;
        let mut x_final = StateVec::zeros();
        x_final[0] = 1.0;
        let mut tol_final = StateVec::from_element(100.0);
        for i in [0, 11] {
            tol_final[i] = 1e-3;
        }
        let base = NlpProblem {
            n: 10,
            method: Transcription::HermiteSimpson,
            bounds: wide_bounds(),
            x_init: StateVec::zeros(),
            tol_init: NlpProblem::pin_tolerance(),
            x_final,
            tol_final,
            field: None,
            radius: 0.0,
        };
        let cfg = SolverConfig::default();
        let first = solve(&base, &f, &straight_seed(10, 0.1), None, &cfg).unwrap();
        assert!(first.report.is_feasible());

        // Perturb the start slightly, as a receding-horizon replan would.
        let mut perturbed = base.clone();
        perturbed.x_init[0] = 0.02;
        perturbed.x_init[11] = 0.1;
        let cold = solve(&perturbed, &f, &straight_seed(10, 0.1), None, &cfg).unwrap();
        let hot = solve(
            &perturbed,
            &f,
            &first.trajectory,
            Some(&first.warm),
            &cfg,
        )
        .unwrap();
        assert!(hot.report.is_feasible());
        assert!(hot.report.warm_started);
        assert!(
            hot.report.inner_iterations <= cold.report.inner_iterations,
            "warm {} vs cold {}",
            hot.report.inner_iterations,
            cold.report.inner_iterations
        );
    }

    #[test]
    fn bad_problem_shapes_are_rejected() {
        let f: Dyn = double_integrator;
        let p = NlpProblem {
            n: 5,
            method: Transcription::Euler,
            bounds: wide_bounds(),
            x_init: StateVec::zeros(),
            tol_init: NlpProblem::pin_tolerance(),
            x_final: StateVec::zeros(),
            tol_final: StateVec::from_element(1.0),
            field: None,
            radius: 0.0,
        };
        let cfg = SolverConfig::default();
        // Seed with the wrong number of knots.
        assert_eq!(
            solve(&p, &f, &straight_seed(4, 0.1), None, &cfg).unwrap_err(),
            TrajoptError::BadProblem
        );
        // Contradictory endpoint boxes make the variable box empty.
        let mut bad = p.clone();
        bad.x_final[0] = 1000.0;
        bad.tol_final = StateVec::from_element(1e-9);
        assert_eq!(
            solve(&bad, &f, &straight_seed(5, 0.1), None, &cfg).unwrap_err(),
            TrajoptError::BadProblem
        );
    }

    #[test]
    fn seed_from_path_aligns_with_the_tangent() {
        use crate::planner::{g2cbs_smooth, reparametrize_time, WaypointPath};
        let z = -1.25;
        let tp = reparametrize_time(
            g2cbs_smooth(
                &WaypointPath {
                    nodes: vec![
                        Vector3::new(0.0, 0.0, z),
                        Vector3::new(3.0, 0.0, z),
                        Vector3::new(3.0, 3.0, z),
                    ],
                },
                2.0,
            )
            .unwrap(),
            4.0,
            1.0,
        )
        .unwrap();
        let params = AircraftParams::edge540_24in();
        let bounds = Bounds::flight_envelope();
        let seed = seed_from_path(&tp, 0.0, 10, 1.0, &params, &bounds);
        assert_eq!(seed.states.len(), 11);
        assert!((seed.h - 0.1).abs() < 1e-12);
        // First knot sits at the path start heading along +x at v_max.
        let x0 = seed.states[0];
        assert!((x0[0] - 0.0).abs() < 1e-9 && (x0[2] - z).abs() < 1e-9);
        assert!(x0[5].abs() < 1e-9, "yaw {}", x0[5]);
        assert!((x0[11] - 4.0).abs() < 1e-9, "forward speed {}", x0[11]);
        assert!(x0[12].abs() < 1e-9 && x0[13].abs() < 1e-9);
        // Yaw never jumps by more than the per-knot turn.
        for w in seed.states.windows(2) {
            assert!((w[1][5] - w[0][5]).abs() < 1.0);
        }
        // Interval clamping.
        let long = seed_from_path(&tp, 0.0, 4, 100.0, &params, &bounds);
        assert!((long.h - bounds.h_max).abs() < 1e-12);
    }

    #[test]
    fn straight_flight_segment_is_dynamically_feasible() {
        use crate::planner::{g2cbs_smooth, reparametrize_time, WaypointPath};
        let z = -1.25;
        let tp = reparametrize_time(
            g2cbs_smooth(
                &WaypointPath {
                    nodes: vec![Vector3::new(0.0, 0.0, z), Vector3::new(8.0, 0.0, z)],
                },
                2.0,
            )
            .unwrap(),
            4.0,
            1.0,
        )
        .unwrap();
        let params = AircraftParams::edge540_24in();
        let bounds = Bounds::flight_envelope();
        let n = 10;
        let seed = seed_from_path(&tp, 0.0, n, 1.0, &params, &bounds);
        let p = NlpProblem {
            n,
            method: Transcription::HermiteSimpson,
            bounds,
            x_init: seed.states[0],
            tol_init: NlpProblem::pin_tolerance(),
            x_final: seed.states[n],
            tol_final: Bounds::endpoint_tolerance(),
            field: None,
            radius: 0.0,
        };
        let f = |x: &StateVec, u: &InputVec| state_derivative_vec(x, u, &params);
        let cfg = SolverConfig::default();
        let sol = solve(&p, &f, &seed, None, &cfg).unwrap();
        assert_eq!(sol.report.status, SolveStatus::Feasible, "{:?}", sol.report);
        assert!(certify(&p, &f, &sol.trajectory, &cfg).unwrap());
        // The solved trajectory really integrates: step each interval with
        // a fine integrator under the first-order-hold input profile the
        // collocation scheme assumes and compare against the next knot.
        let traj = &sol.trajectory;
        for k in 0..n {
            let (u0, u1) = (traj.inputs[k], traj.inputs[k + 1]);
            let mut x = traj.states[k];
            let steps = 200;
            let dt = traj.h / steps as f64;
            let u_at = |t: f64| u0 + (u1 - u0) * (t / traj.h);
            for s in 0..steps {
                let t = s as f64 * dt;
                let k1 = state_derivative_vec(&x, &u_at(t), &params).unwrap();
                let k2 = state_derivative_vec(
                    &(x + k1 * (dt / 2.0)),
                    &u_at(t + dt / 2.0),
                    &params,
                )
                .unwrap();
                let k3 = state_derivative_vec(
                    &(x + k2 * (dt / 2.0)),
                    &u_at(t + dt / 2.0),
                    &params,
                )
                .unwrap();
                let k4 = state_derivative_vec(&(x + k3 * dt), &u_at(t + dt), &params).unwrap();
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            }
            let err = (x - traj.states[k + 1]).norm();
            assert!(
                err < 0.02,
                "interval {k} integration gap {err} (h = {})",
                traj.h
            );
        }
    }

    #[test]
    fn trajectory_sampling_interpolates_and_clamps() {
        let traj = Trajectory {
            states: (0..=2)
                .map(|k| StateVec::from_element(k as f64))
                .collect(),
            inputs: (0..=2)
                .map(|k| InputVec::from_element(2.0 * k as f64))
                .collect(),
            h: 0.5,
        };
        let (x, u) = traj.sample(0.25);
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!((u[0] - 1.0).abs() < 1e-12);
        let (x, _) = traj.sample(100.0);
        assert!((x[0] - 2.0).abs() < 1e-12);
        let (x, _) = traj.sample(-1.0);
        assert!(x[0].abs() < 1e-12);
    }
}
