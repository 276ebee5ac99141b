//! Aircraft state and input vectors with their canonical flattening.

use nalgebra::{SVector, Vector3, Vector4};

/// Number of scalar entries in the flattened aircraft state.
pub const STATE_DIM: usize = 17;
/// Number of scalar entries in the control input.
pub const INPUT_DIM: usize = 5;

pub type StateVec = SVector<f64, STATE_DIM>;
pub type InputVec = SVector<f64, INPUT_DIM>;

/// Full 17-dimensional aircraft state.
///
/// Flattening order is `[r, theta, delta, delta_t, v, omega]`:
/// world position (m), z-y-x Euler angles (rad), control-surface
/// deflections for right aileron / left aileron / elevator / rudder (rad),
/// thrust magnitude (N), body-frame velocity (m/s), body-frame angular
/// velocity (rad/s). The world frame is NED-style with z pointing down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AircraftState {
    /// Position of the center of mass in the world frame, m.
    pub r: Vector3<f64>,
    /// z-y-x Euler angles (roll, pitch, yaw), rad.
    pub theta: Vector3<f64>,
    /// Control surface deflections `[ar, al, e, r]`, rad.
    pub delta: Vector4<f64>,
    /// Thrust magnitude, N.
    pub delta_t: f64,
    /// Body-frame velocity, m/s.
    pub v: Vector3<f64>,
    /// Body-frame angular velocity, rad/s.
    pub omega: Vector3<f64>,
}

impl AircraftState {
    pub fn zero() -> Self {
        Self {
            r: Vector3::zeros(),
            theta: Vector3::zeros(),
            delta: Vector4::zeros(),
            delta_t: 0.0,
            v: Vector3::zeros(),
            omega: Vector3::zeros(),
        }
    }

    /// Flatten into the canonical 17-vector.
    pub fn to_vector(&self) -> StateVec {
        let mut x = StateVec::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.r);
        x.fixed_rows_mut::<3>(3).copy_from(&self.theta);
        x.fixed_rows_mut::<4>(6).copy_from(&self.delta);
        x[10] = self.delta_t;
        x.fixed_rows_mut::<3>(11).copy_from(&self.v);
        x.fixed_rows_mut::<3>(14).copy_from(&self.omega);
        x
    }

    /// Rebuild from the canonical flattening.
    pub fn from_vector(x: &StateVec) -> Self {
        Self {
            r: x.fixed_rows::<3>(0).into(),
            theta: x.fixed_rows::<3>(3).into(),
            delta: x.fixed_rows::<4>(6).into(),
            delta_t: x[10],
            v: x.fixed_rows::<3>(11).into(),
            omega: x.fixed_rows::<3>(14).into(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|e| e.is_finite())
    }

    pub fn roll(&self) -> f64 {
        self.theta[0]
    }
    pub fn pitch(&self) -> f64 {
        self.theta[1]
    }
    pub fn yaw(&self) -> f64 {
        self.theta[2]
    }
}

/// Control input: four surface deflection rates plus normalized throttle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// Deflection rates `[ar, al, e, r]`, rad/s.
    pub surface_rates: Vector4<f64>,
    /// Normalized throttle in `[0, 1]`.
    pub u_t: f64,
}

impl ControlInput {
    pub fn zero() -> Self {
        Self {
            surface_rates: Vector4::zeros(),
            u_t: 0.0,
        }
    }

    pub fn to_vector(&self) -> InputVec {
        let mut u = InputVec::zeros();
        u.fixed_rows_mut::<4>(0).copy_from(&self.surface_rates);
        u[4] = self.u_t;
        u
    }

    pub fn from_vector(u: &InputVec) -> Self {
        Self {
            surface_rates: u.fixed_rows::<4>(0).into(),
            u_t: u[4],
        }
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * std::f64::consts::PI);
    if w > std::f64::consts::PI {
        w -= 2.0 * std::f64::consts::PI;
    }
    w
}
