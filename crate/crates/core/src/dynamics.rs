//! Flat-plate aircraft dynamics: rotations, per-surface aerodynamics with
//! propeller backwash, thrust lag, the full 17-state derivative, and
//! finite-difference linearization.

use nalgebra::{Matrix3, SMatrix, Vector3, Vector4};
use thiserror::Error;

use crate::params::{AeroSurface, AircraftParams};
use crate::state::{AircraftState, ControlInput, InputVec, StateVec, INPUT_DIM, STATE_DIM};

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DynamicsError {
    #[error("pitch within the gimbal tolerance of +-pi/2")]
    GimbalLock,
    #[error("negative thrust passed to the backwash model")]
    NegativeThrust,
    #[error("surface planar flow speed below the degeneracy threshold")]
    DegenerateVelocity,
}

/// Rotation from the body-fixed frame to the world frame for z-y-x Euler
/// angles (roll, pitch, yaw): `R = Rz(psi) Ry(theta) Rx(phi)`.
pub fn euler_to_rotation(theta: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = theta[0].sin_cos(); // roll phi
    let (st, ct) = theta[1].sin_cos(); // pitch theta
    let (sy, cy) = theta[2].sin_cos(); // yaw psi
    Matrix3::new(
        cy * ct,
        cy * st * sp - sy * cp,
        cy * st * cp + sy * sp,
        sy * ct,
        sy * st * sp + cy * cp,
        sy * st * cp - cy * sp,
        -st,
        ct * sp,
        ct * cp,
    )
}

/// Map body angular velocity to Euler-angle rates: `theta_dot = R_w^-1 w`.
pub fn euler_rate_map(
    theta: &Vector3<f64>,
    omega: &Vector3<f64>,
    eps_gimbal: f64,
) -> Result<Vector3<f64>, DynamicsError> {
    let (sp, cp) = theta[0].sin_cos();
    let pitch = theta[1];
    if (std::f64::consts::FRAC_PI_2 - pitch.abs()).abs() < eps_gimbal
        || pitch.abs() > std::f64::consts::FRAC_PI_2
    {
        return Err(DynamicsError::GimbalLock);
    }
    let (st, ct) = pitch.sin_cos();
    let tt = st / ct;
    Ok(Vector3::new(
        omega[0] + sp * tt * omega[1] + cp * tt * omega[2],
        cp * omega[1] - sp * omega[2],
        (sp / ct) * omega[1] + (cp / ct) * omega[2],
    ))
}

/// Forward Euler-rate map `omega = R_w theta_dot`; inverse of
/// [`euler_rate_map`].
pub fn euler_rates_to_omega(theta: &Vector3<f64>, theta_dot: &Vector3<f64>) -> Vector3<f64> {
    let (sp, cp) = theta[0].sin_cos();
    let (st, ct) = theta[1].sin_cos();
    let r_w = Matrix3::new(
        1.0,
        0.0,
        -st,
        0.0,
        cp,
        sp * ct,
        0.0,
        -sp,
        cp * ct,
    );
    r_w * theta_dot
}

/// Momentum-theory backwash speed behind the actuator disk.
pub fn backwash_velocity(
    v_p: f64,
    delta_t: f64,
    params: &AircraftParams,
) -> Result<f64, DynamicsError> {
    if delta_t < 0.0 {
        return Err(DynamicsError::NegativeThrust);
    }
    let v = v_p.abs();
    Ok((v * v + 2.0 * delta_t / (params.rho * params.disk_area)).sqrt() - v)
}

/// Speed at the propeller: the component of the lever-arm-corrected body
/// velocity along the thrust axis.
pub fn prop_inflow_speed(state: &AircraftState, params: &AircraftParams) -> f64 {
    let thrust_axis = params.thrust_mount * Vector3::x();
    (state.v + state.omega.cross(&params.prop_offset)).dot(&thrust_axis)
}

/// Rotation body -> surface including the deflection of an actuated
/// surface about its span axis.
pub fn effective_mount(surface: &AeroSurface, delta: &Vector4<f64>) -> Matrix3<f64> {
    match &surface.actuation {
        None => surface.mount_rotation,
        Some(act) => {
            let d = act.sign * delta[act.channel];
            let (s, c) = d.sin_cos();
            // Rotation of the surface frame about its own y (span) axis.
            let r_y = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
            r_y.transpose() * surface.mount_rotation
        }
    }
}

/// Body-frame moment arm from the center of mass to the surface center of
/// pressure: `r_s = l_h e_x + R_s^T (l_s e_xs)`.
pub fn surface_moment_arm(surface: &AeroSurface, mount: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(surface.l_h, 0.0, 0.0) + mount.transpose() * Vector3::new(surface.l_s, 0.0, 0.0)
}

/// Velocity of an aerodynamic surface expressed in the surface frame.
pub fn surface_velocity(
    state: &AircraftState,
    surface: &AeroSurface,
    params: &AircraftParams,
    surface_rate: f64,
) -> Result<Vector3<f64>, DynamicsError> {
    let v_bw = backwash_velocity(
        prop_inflow_speed(state, params),
        state.delta_t.max(0.0),
        params,
    )?;
    Ok(surface_velocity_with_backwash(
        state,
        surface,
        v_bw,
        surface_rate,
    ))
}

fn surface_velocity_with_backwash(
    state: &AircraftState,
    surface: &AeroSurface,
    v_bw: f64,
    surface_rate: f64,
) -> Vector3<f64> {
    let mount = effective_mount(surface, &state.delta);
    let hinge_vel = state.v
        + state.omega.cross(&surface.hinge_offset)
        + surface.backwash_gain * v_bw * Vector3::x();
    let omega_s = match &surface.actuation {
        Some(act) => Vector3::new(0.0, act.sign * surface_rate, 0.0),
        None => Vector3::zeros(),
    };
    let arm_sf = mount * surface_moment_arm(surface, &mount);
    mount * hinge_vel + (mount * state.omega + omega_s).cross(&arm_sf)
}

/// Surface angle of attack from the chord-plane flow components.
pub fn surface_aoa(v_s: &Vector3<f64>, eps_velocity: f64) -> Result<f64, DynamicsError> {
    if v_s[0].hypot(v_s[2]) < eps_velocity {
        return Err(DynamicsError::DegenerateVelocity);
    }
    Ok(v_s[2].atan2(v_s[0]))
}

/// Flat-plate normal force magnitude `f_n = 1/2 C_n rho |v_s|^2 S` with
/// `C_n = 2 sin(alpha)`. Degenerate flow contributes zero force.
pub fn surface_force(v_s: &Vector3<f64>, area: f64, rho: f64, eps_velocity: f64) -> f64 {
    match surface_aoa(v_s, eps_velocity) {
        Ok(alpha) => {
            let c_n = 2.0 * alpha.sin();
            0.5 * c_n * rho * v_s.norm_squared() * area
        }
        Err(_) => 0.0,
    }
}

/// Total body-frame force and moment: per-surface flat-plate forces,
/// gravity, and thrust.
pub fn total_forces_moments(
    state: &AircraftState,
    params: &AircraftParams,
    surface_rates: &Vector4<f64>,
) -> Result<(Vector3<f64>, Vector3<f64>), DynamicsError> {
    let v_bw = backwash_velocity(
        prop_inflow_speed(state, params),
        state.delta_t.max(0.0),
        params,
    )?;

    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for surface in &params.surfaces {
        let rate = match &surface.actuation {
            Some(act) => surface_rates[act.channel],
            None => 0.0,
        };
        let mount = effective_mount(surface, &state.delta);
        let v_s = surface_velocity_with_backwash(state, surface, v_bw, rate);
        let f_n = surface_force(&v_s, surface.area, params.rho, params.eps_velocity);
        // Normal force opposes the flow component along the plate normal.
        let f_surface = Vector3::new(0.0, 0.0, -f_n);
        let f_body = mount.transpose() * f_surface;
        force += f_body;
        moment += surface_moment_arm(surface, &mount).cross(&f_body);
    }

    // Gravity acts along world +z (z-down convention).
    let r_bw = euler_to_rotation(&state.theta);
    force += r_bw.transpose() * Vector3::new(0.0, 0.0, params.mass * params.gravity);

    // Thrust along the thrust-frame x axis.
    force += params.thrust_mount * Vector3::new(state.delta_t.max(0.0), 0.0, 0.0);

    Ok((force, moment))
}

/// Full 17-state derivative in the canonical flattening order.
pub fn state_derivative(
    state: &AircraftState,
    input: &ControlInput,
    params: &AircraftParams,
) -> Result<StateVec, DynamicsError> {
    let r_bw = euler_to_rotation(&state.theta);
    let r_dot = r_bw * state.v;
    let theta_dot = euler_rate_map(&state.theta, &state.omega, params.eps_gimbal)?;
    let delta_dot = input.surface_rates;
    let delta_t_dot = params.thrust_a * state.delta_t + params.thrust_b * input.u_t;

    let (f, m) = total_forces_moments(state, params, &input.surface_rates)?;
    let v_dot = f / params.mass - state.omega.cross(&state.v);
    let j_omega = params.inertia * state.omega;
    let omega_dot = params
        .inertia
        .try_inverse()
        .expect("inertia validated positive definite")
        * (m - state.omega.cross(&j_omega));

    let mut dx = StateVec::zeros();
    dx.fixed_rows_mut::<3>(0).copy_from(&r_dot);
    dx.fixed_rows_mut::<3>(3).copy_from(&theta_dot);
    dx.fixed_rows_mut::<4>(6).copy_from(&delta_dot);
    dx[10] = delta_t_dot;
    dx.fixed_rows_mut::<3>(11).copy_from(&v_dot);
    dx.fixed_rows_mut::<3>(14).copy_from(&omega_dot);
    Ok(dx)
}

/// Convenience wrapper on flattened vectors.
pub fn state_derivative_vec(
    x: &StateVec,
    u: &InputVec,
    params: &AircraftParams,
) -> Result<StateVec, DynamicsError> {
    state_derivative(
        &AircraftState::from_vector(x),
        &ControlInput::from_vector(u),
        params,
    )
}

pub type AMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type BMatrix = SMatrix<f64, STATE_DIM, INPUT_DIM>;

/// Central-difference linearization `A = df/dx`, `B = df/du`.
pub fn linearize(
    state: &AircraftState,
    input: &ControlInput,
    params: &AircraftParams,
    eps: f64,
) -> Result<(AMatrix, BMatrix), DynamicsError> {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let x0 = state.to_vector();
    let u0 = input.to_vector();

    let mut a = AMatrix::zeros();
    for j in 0..STATE_DIM {
        let mut xp = x0;
        let mut xm = x0;
        xp[j] += eps;
        xm[j] -= eps;
        let fp = state_derivative_vec(&xp, &u0, params)?;
        let fm = state_derivative_vec(&xm, &u0, params)?;
        a.set_column(j, &((fp - fm) / (2.0 * eps)));
    }

    let mut b = BMatrix::zeros();
    for j in 0..INPUT_DIM {
        let mut up = u0;
        let mut um = u0;
        up[j] += eps;
        um[j] -= eps;
        let fp = state_derivative_vec(&x0, &up, params)?;
        let fm = state_derivative_vec(&x0, &um, params)?;
        b.set_column(j, &((fp - fm) / (2.0 * eps)));
    }
    Ok((a, b))
}
