//! Steady-turn trim analysis: minimum turn radius as a function of an
//! angle-of-attack cap. The aircraft flies a level coordinated turn with
//! all control surfaces held at zero deflection ("without control
//! surfaces"); only speed, attitude, turn rate, and thrust vary. Moment
//! balance is deliberately ignored — the point of the study is the force
//! envelope, not controllability.

use nalgebra::{Matrix4, Vector3, Vector4};

use super::HarnessError;
use crate::dynamics::{self};
use crate::params::AircraftParams;
use crate::state::{AircraftState, ControlInput, StateVec};

/// Trimmed steady turn under one angle-of-attack cap.
#[derive(Debug, Clone)]
pub struct TrimResult {
    /// Cap on the wing angle of attack, rad.
    pub alpha_cap: f64,
    /// Turn radius, m (`+inf` in the straight-flight limit).
    pub radius: f64,
    /// Flight speed, m/s.
    pub speed: f64,
    /// Wing angle of attack at the trim point, rad.
    pub alpha: f64,
    /// Turn rate, rad/s.
    pub turn_rate: f64,
    /// Thrust, N.
    pub thrust: f64,
    /// Full aircraft state at the trim point.
    pub state: StateVec,
    /// Max-norm of the trim equation residual.
    pub residual: f64,
}

/// Radius of a turn at horizontal speed `v_h` and yaw rate `psi_dot`;
/// the straight-flight limit maps to infinity.
pub fn turn_radius(v_h: f64, psi_dot: f64) -> f64 {
    if psi_dot.abs() < 1e-12 {
        f64::INFINITY
    } else {
        v_h / psi_dot.abs()
    }
}

/// Maximum steady thrust: the throttle state settles at `-b/a * u_t`.
fn max_thrust(params: &AircraftParams) -> f64 {
    -params.thrust_b / params.thrust_a
}

/// Build the candidate trim state for the unknown vector and fixed
/// speed/angle-of-attack pair. Unknowns: roll, pitch, yaw rate, thrust.
fn trim_state(v: f64, alpha: f64, z: &Vector4<f64>) -> AircraftState {
    let mut s = AircraftState::zero();
    s.theta = Vector3::new(z[0], z[1], 0.0);
    s.v = Vector3::new(v * alpha.cos(), 0.0, v * alpha.sin());
    s.delta_t = z[3];
    s.omega = dynamics::euler_rates_to_omega(&s.theta, &Vector3::new(0.0, 0.0, z[2]));
    s
}

/// Trim equations: body-frame velocity derivative (3) and the climb rate
/// (level-flight constraint). All four vanish at a steady level turn.
fn trim_residual(
    v: f64,
    alpha: f64,
    z: &Vector4<f64>,
    params: &AircraftParams,
) -> Option<Vector4<f64>> {
    let s = trim_state(v, alpha, z);
    // Hold the throttle state steady: u_t = -a/b * delta_t.
    let u_t = (-params.thrust_a / params.thrust_b * z[3]).clamp(0.0, 1.0);
    let input = ControlInput {
        surface_rates: Vector4::zeros(),
        u_t,
    };
    let dx = dynamics::state_derivative(&s, &input, params).ok()?;
    Some(Vector4::new(dx[11], dx[12], dx[13], dx[2]))
}

/// Newton iteration on the four trim unknowns with a finite-difference
/// Jacobian. Returns the solution and its residual max-norm.
fn newton_trim(
    v: f64,
    alpha: f64,
    z0: Vector4<f64>,
    params: &AircraftParams,
) -> Option<(Vector4<f64>, f64)> {
    let mut z = z0;
    let t_max = max_thrust(params);
    for _ in 0..60 {
        let r = trim_residual(v, alpha, &z, params)?;
        let rn = r.amax();
        if rn < 1e-10 {
            return Some((z, rn));
        }
        let mut jac = Matrix4::zeros();
        for j in 0..4 {
            let eps = 1e-7 * (1.0 + z[j].abs());
            let mut zp = z;
            zp[j] += eps;
            let rp = trim_residual(v, alpha, &zp, params)?;
            jac.set_column(j, &((rp - r) / eps));
        }
        let step = jac.lu().solve(&(-r))?;
        z += step;
        // Keep the iterate inside the physically meaningful box.
        if z[0].abs() > 1.5 || z[1].abs() > 1.4 || z[2].abs() > 25.0 {
            return None;
        }
        z[3] = z[3].clamp(0.0, t_max);
    }
    None
}

/// Minimum-radius steady coordinated turns for a sweep of angle-of-attack
/// caps. For each cap the solver scans speed and angle of attack, solves
/// the force balance by Newton iteration at each grid point, and keeps
/// the tightest converged turn whose thrust fits the throttle range.
pub fn trim_turn_radius(
    alpha_caps: &[f64],
    speed_bounds: (f64, f64),
    params: &AircraftParams,
) -> Result<Vec<TrimResult>, HarnessError> {
    let (v_lo, v_hi) = speed_bounds;
    if !(v_lo > 0.0 && v_hi > v_lo) {
        return Err(HarnessError::Config("speed bounds must be ordered and positive".into()));
    }
    for &cap in alpha_caps {
        if !(cap > 0.0 && cap < std::f64::consts::FRAC_PI_2) {
            return Err(HarnessError::Config("angle-of-attack caps must lie in (0, pi/2)".into()));
        }
    }
    // Simplified airframe: drop the actuated surfaces entirely and turn
    // off propwash over the remaining ones. With backwash on, blown lift
    // lets the airframe hover at arbitrarily small wing incidence, which
    // makes the cap meaningless; the study is about unblown aerodynamics.
    let mut simple = params.clone();
    simple.surfaces.retain(|s| s.actuation.is_none());
    for s in &mut simple.surfaces {
        s.backwash_gain = 0.0;
    }
    let params = &simple;

    let t_max = max_thrust(params);
    let g = params.gravity;

    // Shared grids so the feasible sets nest across caps.
    let n_alpha = 70;
    let alpha_max = alpha_caps.iter().cloned().fold(0.0, f64::max);
    let alphas: Vec<f64> = (1..=n_alpha)
        .map(|i| alpha_max * i as f64 / n_alpha as f64)
        .collect();
    let n_v = 24;
    let speeds: Vec<f64> = (0..n_v)
        .map(|i| v_lo + (v_hi - v_lo) * i as f64 / (n_v - 1) as f64)
        .collect();

    let mut best: Vec<Option<TrimResult>> = vec![None; alpha_caps.len()];
    for &alpha in &alphas {
        for &v in &speeds {
            // Initial guesses: moderate and steep bank.
            let mut found: Option<(Vector4<f64>, f64)> = None;
            for phi0 in [0.5f64, 1.1] {
                let psi0 = g * phi0.tan() / v;
                let t0 = (0.3 * t_max).min(t_max);
                let z0 = Vector4::new(phi0, alpha, psi0, t0);
                if let Some(sol) = newton_trim(v, alpha, z0, params) {
                    found = Some(sol);
                    break;
                }
            }
            let Some((z, residual)) = found else { continue };
            // Reject turns needing more thrust than the throttle allows
            // (the Newton box clamps at the limit, leaving a residual,
            // but guard explicitly) or spinning the wrong way.
            if z[3] < 0.0 || z[3] > t_max - 1e-9 || z[2] <= 1e-6 {
                continue;
            }
            let s = trim_state(v, alpha, &z);
            let v_world = dynamics::euler_to_rotation(&s.theta) * s.v;
            let v_h = v_world.fixed_rows::<2>(0).norm();
            let radius = turn_radius(v_h, z[2]);
            for (slot, &cap) in best.iter_mut().zip(alpha_caps) {
                if alpha > cap + 1e-12 {
                    continue;
                }
                if slot.as_ref().map_or(true, |b| radius < b.radius) {
                    *slot = Some(TrimResult {
                        alpha_cap: cap,
                        radius,
                        speed: v,
                        alpha,
                        turn_rate: z[2],
                        thrust: z[3],
                        state: s.to_vector(),
                        residual,
                    });
                }
            }
        }
    }

    alpha_caps
        .iter()
        .zip(best)
        .map(|(&cap, slot)| slot.ok_or(HarnessError::TrimInfeasible(cap)))
        .collect()
}
