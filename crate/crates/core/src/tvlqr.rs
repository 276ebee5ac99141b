//! Time-varying LQR stabilization of an optimized trajectory.
//!
//! The feedback is designed in a reduced four-channel input space where
//! the ailerons deflect differentially (right rate = -left rate), then
//! expanded back to the five physical inputs. The Riccati equation is
//! integrated backward in time with RK4 on a refinement of the knot grid,
//! linearizing the dynamics about the interpolated trajectory.

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::dynamics::{linearize, DynamicsError};
use crate::params::AircraftParams;
use crate::state::{
    wrap_angle, AircraftState, ControlInput, InputVec, StateVec, INPUT_DIM, STATE_DIM,
};
use crate::trajopt::Trajectory;

/// Number of reduced input channels: differential aileron rate, elevator
/// rate, rudder rate, throttle.
pub const REDUCED_DIM: usize = 4;

pub type SMat = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type KMat = SMatrix<f64, REDUCED_DIM, STATE_DIM>;
type B4Mat = SMatrix<f64, STATE_DIM, REDUCED_DIM>;
type ReducedVec = SVector<f64, REDUCED_DIM>;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum TvlqrError {
    #[error("Riccati integration diverged (entry magnitude above the cap)")]
    RiccatiBlowup,
    #[error("dynamics linearization failed along the trajectory: {0}")]
    Linearization(DynamicsError),
    #[error("trajectory too short or refinement invalid")]
    BadInput,
}

/// Map from the reduced input space to the five physical inputs: channel
/// 0 drives the ailerons differentially.
pub fn input_expansion() -> SMatrix<f64, INPUT_DIM, REDUCED_DIM> {
    SMatrix::<f64, INPUT_DIM, REDUCED_DIM>::from_row_slice(&[
        1.0, 0.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    ])
}

/// Project a physical input onto the reduced channels (least squares on
/// the aileron pair).
pub fn reduce_input(u: &InputVec) -> ReducedVec {
    ReducedVec::new(0.5 * (u[0] - u[1]), u[2], u[3], u[4])
}

/// Diagonal weights for the tracking LQR.
#[derive(Debug, Clone, Copy)]
pub struct TvlqrWeights {
    pub q: StateVec,
    pub r: ReducedVec,
    pub q_f: StateVec,
}

impl Default for TvlqrWeights {
    /// Inverse-variance style weights: position errors of a few meters,
    /// attitude errors of tens of degrees, loose on actuator states.
    fn default() -> Self {
        let mut q = StateVec::zeros();
        for i in 0..3 {
            q[i] = 1.0 / 25.0;
        }
        for i in 3..6 {
            q[i] = 1.0 / 50.0;
        }
        for i in 6..STATE_DIM {
            q[i] = 1.0 / 2.0;
        }
        let r = ReducedVec::new(10.0, 10.0, 10.0, 1.0 / 25.0);
        let mut q_f = StateVec::zeros();
        for i in 0..6 {
            q_f[i] = 1.0 / 100.0;
        }
        for i in 6..STATE_DIM {
            q_f[i] = 1.0;
        }
        Self { q, r, q_f }
    }
}

/// Gain schedule along a trajectory.
#[derive(Debug, Clone)]
pub struct TvlqrPolicy {
    /// Time grid, ascending from 0 to the trajectory duration.
    pub times: Vec<f64>,
    /// Cost-to-go matrices on the grid (symmetric PSD).
    pub s_mats: Vec<SMat>,
    /// Feedback gains on the grid.
    pub k_mats: Vec<KMat>,
    pub trajectory: Trajectory,
    pub u_min: InputVec,
    pub u_max: InputVec,
}

const S_CAP: f64 = 1e9;

/// Integrate the Riccati equation backward along the trajectory. The
/// grid refines each knot interval `refinement` times; linearizations
/// are taken about the interpolated trajectory.
pub fn riccati_backward(
    traj: &Trajectory,
    params: &AircraftParams,
    weights: &TvlqrWeights,
    refinement: usize,
    u_min: InputVec,
    u_max: InputVec,
) -> Result<TvlqrPolicy, TvlqrError> {
    if traj.states.len() < 2 || refinement == 0 {
        return Err(TvlqrError::BadInput);
    }
    let n_steps = traj.n_intervals() * refinement;
    let dt = traj.h / refinement as f64;
    let m = input_expansion();
    let q = SMat::from_diagonal(&weights.q);
    let r_inv = SMatrix::<f64, REDUCED_DIM, REDUCED_DIM>::from_diagonal(
        &weights.r.map(|v| 1.0 / v),
    );

    // Linearize once per grid point (shared between RK4 stages of the
    // adjacent steps; the half-step stage reuses the midpoint argument).
    let ab_at = |t: f64| -> Result<(SMat, B4Mat), TvlqrError> {
        let (x, u) = traj.sample(t);
        let (a, b) = linearize(
            &AircraftState::from_vector(&x),
            &ControlInput::from_vector(&u),
            params,
            1e-5,
        )
        .map_err(TvlqrError::Linearization)?;
        Ok((a, b * m))
    };

    let deriv = |s: &SMat, a: &SMat, b: &B4Mat| -> SMat {
        // -dS/dt along forward time; returned as the backward derivative.
        let at_s = a.transpose() * s;
        at_s + at_s.transpose() - s * b * r_inv * b.transpose() * s + q
    };

    let mut times = vec![0.0; n_steps + 1];
    for (i, t) in times.iter_mut().enumerate() {
        *t = dt * i as f64;
    }
    let mut s_mats = vec![SMat::zeros(); n_steps + 1];
    s_mats[n_steps] = SMat::from_diagonal(&weights.q_f);

    // One backward RK4 step of length `step` ending at time `t_hi`.
    let rk4_back = |s1: &SMat, t_hi: f64, step: f64| -> Result<SMat, TvlqrError> {
        let (a1, b1) = ab_at(t_hi)?;
        let (am, bm) = ab_at(t_hi - 0.5 * step)?;
        let (a0, b0) = ab_at(t_hi - step)?;
        let k1 = deriv(s1, &a1, &b1);
        let k2 = deriv(&(s1 + k1 * (step / 2.0)), &am, &bm);
        let k3 = deriv(&(s1 + k2 * (step / 2.0)), &am, &bm);
        let k4 = deriv(&(s1 + k3 * step), &a0, &b0);
        let s0 = s1 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
        Ok((s0 + s0.transpose()) * 0.5)
    };

    for i in (0..n_steps).rev() {
        // The quadratic term makes the equation stiff near the terminal
        // transient, so each grid interval is integrated with adaptive
        // sub-stepping: compare one step against two half steps and
        // halve until they agree.
        let mut s = s_mats[i + 1];
        let mut t_hi = times[i + 1];
        let t_lo = times[i];
        let mut sub = t_hi - t_lo;
        let mut guard = 0usize;
        while t_hi > t_lo + 1e-12 {
            guard += 1;
            if guard > 100_000 {
                return Err(TvlqrError::RiccatiBlowup);
            }
            sub = sub.min(t_hi - t_lo);
            let full = rk4_back(&s, t_hi, sub)?;
            let half = rk4_back(&s, t_hi, 0.5 * sub)?;
            let two_halves = rk4_back(&half, t_hi - 0.5 * sub, 0.5 * sub)?;
            let ok = full.iter().all(|v| v.is_finite())
                && two_halves.iter().all(|v| v.is_finite())
                && (full - two_halves).amax() <= 1e-6 * (s.amax() + 1.0);
            if ok {
                s = two_halves;
                t_hi -= sub;
                sub *= 2.0;
            } else {
                sub *= 0.25;
                if sub < 1e-12 {
                    return Err(TvlqrError::RiccatiBlowup);
                }
            }
            if s.amax() > S_CAP {
                return Err(TvlqrError::RiccatiBlowup);
            }
        }
        if !s.iter().all(|v| v.is_finite()) || s.amax() > S_CAP {
            return Err(TvlqrError::RiccatiBlowup);
        }
        s_mats[i] = s;
    }

    let mut k_mats = vec![KMat::zeros(); n_steps + 1];
    for i in 0..=n_steps {
        let (_, b) = ab_at(times[i])?;
        k_mats[i] = r_inv * b.transpose() * s_mats[i];
    }

    Ok(TvlqrPolicy {
        times,
        s_mats,
        k_mats,
        trajectory: traj.clone(),
        u_min,
        u_max,
    })
}

impl TvlqrPolicy {
    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let t = t.clamp(0.0, self.duration());
        let dt = self.times[1] - self.times[0];
        let i = ((t / dt).floor() as usize).min(self.times.len() - 2);
        ((i), ((t - self.times[i]) / dt).clamp(0.0, 1.0))
    }

    /// Gain at time `t`, linearly interpolated and clamped to the span.
    pub fn gain_at(&self, t: f64) -> KMat {
        let (i, w) = self.locate(t);
        self.k_mats[i] * (1.0 - w) + self.k_mats[i + 1] * w
    }

    /// Cost-to-go matrix at time `t`.
    pub fn cost_to_go_at(&self, t: f64) -> SMat {
        let (i, w) = self.locate(t);
        self.s_mats[i] * (1.0 - w) + self.s_mats[i + 1] * w
    }

    /// Closed-loop input at time `t` for a measured state: the nominal
    /// input minus the gain acting on the state error, with the Euler
    /// angle errors wrapped and the result saturated to the input box.
    pub fn feedback_control(&self, t: f64, x: &StateVec) -> InputVec {
        let (x0, u0) = self.trajectory.sample(t);
        let mut err = x - x0;
        for i in 3..6 {
            err[i] = wrap_angle(err[i]);
        }
        let k = self.gain_at(t);
        let u4 = reduce_input(&u0) - k * err;
        let mut u = input_expansion() * u4;
        for i in 0..INPUT_DIM {
            u[i] = u[i].clamp(self.u_min[i], self.u_max[i]);
        }
        u
    }
}
