//! Curvature-to-velocity mapping and time reparametrization of a smoothed
//! path.

use nalgebra::Vector3;

use super::{PlannerError, SmoothPath};

/// Arclength grid spacing for the time integral, m.
const DS: f64 = 0.01;
/// Minimum admissible path speed, m/s.
pub const V_FLOOR: f64 = 0.1;

/// Time-parametrized path: `v(s) = v_max - kappa(s) * kappa_gain`,
/// `t(s) = integral of 1/v`.
#[derive(Debug, Clone)]
pub struct TimeParamPath {
    pub smooth: SmoothPath,
    pub v_max: f64,
    pub kappa_gain: f64,
    /// Monotone arclength grid.
    s_grid: Vec<f64>,
    /// Times at the grid points; strictly increasing, t_grid[0] = 0.
    t_grid: Vec<f64>,
    pub total_time: f64,
}

/// Map curvature to velocity along the path and integrate the time law on
/// a dense arclength grid.
pub fn reparametrize_time(
    smooth: SmoothPath,
    v_max: f64,
    kappa_gain: f64,
) -> Result<TimeParamPath, PlannerError> {
    let total = smooth.total_length();
    let n = ((total / DS).ceil() as usize).max(2);
    let mut s_grid = Vec::with_capacity(n + 1);
    let mut speeds = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let s = total * i as f64 / n as f64;
        let v = v_max - smooth.curvature(s) * kappa_gain;
        if v <= V_FLOOR {
            return Err(PlannerError::VelocityUnderflow);
        }
        s_grid.push(s);
        speeds.push(v);
    }
    // Composite trapezoid on 1/v.
    let mut t_grid = Vec::with_capacity(n + 1);
    let mut t = 0.0;
    t_grid.push(0.0);
    for i in 1..=n {
        let ds = s_grid[i] - s_grid[i - 1];
        t += 0.5 * ds * (1.0 / speeds[i - 1] + 1.0 / speeds[i]);
        t_grid.push(t);
    }
    Ok(TimeParamPath {
        smooth,
        v_max,
        kappa_gain,
        s_grid,
        t_grid,
        total_time: t,
    })
}

impl TimeParamPath {
    /// Time at arclength `s` by monotone interpolation of the grid.
    pub fn time_of_arclength(&self, s: f64) -> f64 {
        interp(&self.s_grid, &self.t_grid, s)
    }

    /// Arclength at time `t` (inverse of the monotone time table).
    pub fn arclength_of_time(&self, t: f64) -> f64 {
        interp(&self.t_grid, &self.s_grid, t)
    }

    /// Speed at arclength `s`.
    pub fn speed(&self, s: f64) -> f64 {
        self.v_max - self.smooth.curvature(s) * self.kappa_gain
    }

    /// Position, unit tangent, and speed at time `t` (clamped to the path
    /// span).
    pub fn sample(&self, t: f64) -> (Vector3<f64>, Vector3<f64>, f64) {
        let s = self.arclength_of_time(t.clamp(0.0, self.total_time));
        let pos = self.smooth.position(s);
        let tangent = self.smooth.tangent(s);
        let speed = self.speed(s);
        (pos, tangent, speed)
    }
}

/// Evaluate the receding-horizon endpoint: position and velocity at the
/// time horizon, clamped to the path end.
pub fn select_endpoint(tp: &TimeParamPath, horizon: f64) -> (Vector3<f64>, Vector3<f64>) {
    assert!(horizon > 0.0, "time horizon must be positive");
    let (pos, tangent, speed) = tp.sample(horizon.min(tp.total_time));
    (pos, speed * tangent)
}

/// Piecewise-linear interpolation on a monotone grid, clamped at the ends.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= *xs.last().unwrap() {
        return *ys.last().unwrap();
    }
    let idx = match xs.binary_search_by(|probe| probe.total_cmp(&x)) {
        Ok(i) => return ys[i],
        Err(i) => i,
    };
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let (y0, y1) = (ys[idx - 1], ys[idx]);
    let w = (x - x0) / (x1 - x0);
    y0 + w * (y1 - y0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{g2cbs_smooth, WaypointPath};

    fn straight_path(len: f64) -> SmoothPath {
        g2cbs_smooth(
            &WaypointPath {
                nodes: vec![Vector3::zeros(), Vector3::new(len, 0.0, 0.0)],
            },
            2.0,
        )
        .unwrap()
    }

    fn corner_path() -> SmoothPath {
        g2cbs_smooth(
            &WaypointPath {
                nodes: vec![
                    Vector3::zeros(),
                    Vector3::new(3.0, 0.0, 0.0),
                    Vector3::new(3.0, 3.0, 0.0),
                ],
            },
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn straight_path_total_time() {
        let tp = reparametrize_time(straight_path(8.0), 4.0, 1.0).unwrap();
        assert!((tp.total_time - 2.0).abs() < 1e-9);
    }

    #[test]
    fn max_curvature_piece_speed() {
        let tp = reparametrize_time(corner_path(), 4.0, 1.0).unwrap();
        let total = tp.smooth.total_length();
        // Find the apex (max curvature point) and check the speed formula.
        let mut apex_s = 0.0;
        let mut apex_k: f64 = 0.0;
        for i in 0..=4000 {
            let s = total * i as f64 / 4000.0;
            let k = tp.smooth.curvature(s);
            if k > apex_k {
                apex_k = k;
                apex_s = s;
            }
        }
        assert!((tp.speed(apex_s) - (4.0 - apex_k)).abs() < 1e-12);
    }

    #[test]
    fn time_map_round_trips() {
        let tp = reparametrize_time(corner_path(), 4.0, 1.0).unwrap();
        let total = tp.smooth.total_length();
        for i in 0..=1000 {
            let s = total * i as f64 / 1000.0;
            let t = tp.time_of_arclength(s);
            let s_back = tp.arclength_of_time(t);
            assert!(
                (s - s_back).abs() < 1e-6 * total.max(1.0),
                "round-trip error at s={s}: {}",
                (s - s_back).abs()
            );
        }
        // Monotone with slope at least 1/v_max.
        for w in tp.t_grid.windows(2).zip(tp.s_grid.windows(2)) {
            let (tw, sw) = w;
            assert!(tw[1] > tw[0]);
            assert!(tw[1] - tw[0] >= (sw[1] - sw[0]) / tp.v_max - 1e-12);
        }
    }

    #[test]
    fn velocity_underflow_errors() {
        // kappa_max = 2 with gain 3 drives v below the floor at v_max = 6.
        assert_eq!(
            reparametrize_time(corner_path(), 2.05, 1.0).unwrap_err(),
            PlannerError::VelocityUnderflow
        );
    }

    #[test]
    fn endpoint_clamps_to_path_end() {
        let tp = reparametrize_time(straight_path(2.0), 4.0, 1.0).unwrap();
        let (pos, vel) = select_endpoint(&tp, 100.0);
        assert!((pos - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-9);
        assert!((vel - Vector3::new(4.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn endpoint_on_straight_path_at_uniform_speed() {
        let tp = reparametrize_time(straight_path(8.0), 4.0, 1.0).unwrap();
        let (pos, vel) = select_endpoint(&tp, 1.0);
        assert!((pos - Vector3::new(4.0, 0.0, 0.0)).norm() < 1e-6);
        assert!((vel - Vector3::new(4.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn endpoint_speed_consistent_with_time_tables() {
        let tp = reparametrize_time(corner_path(), 4.0, 1.0).unwrap();
        let t_h = 1.0;
        let (_, vel) = select_endpoint(&tp, t_h);
        let s = tp.arclength_of_time(t_h);
        assert!((vel.norm() - tp.speed(s)).abs() < 1e-9);
    }
}
