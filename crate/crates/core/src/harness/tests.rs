use super::*;
use crate::environment::HallwaySpec;
use crate::params::AircraftParams;

fn corner() -> HallwaySpec {
    HallwaySpec::corner(1.75, 2.5, 4.0)
}

#[test]
fn rejects_bad_configurations() {
    let mut cfg = RunConfig::default();
    cfg.replan_hz = 0.0;
    assert!(matches!(
        closed_loop_run(&corner(), &cfg),
        Err(HarnessError::Config(_))
    ));

    let mut spec = corner();
    spec.start = nalgebra::Vector3::new(0.0, 5.0, -1.25); // inside a wall
    assert!(matches!(
        closed_loop_run(&spec, &RunConfig::default()),
        Err(HarnessError::Config(_))
    ));
}

#[test]
fn closed_loop_reaches_the_goal_with_an_exact_model() {
    let mut cfg = RunConfig::default();
    cfg.rng_seed = 7;
    cfg.max_sim_time = 15.0;
    let log = closed_loop_run(&corner(), &cfg).unwrap();
    assert_eq!(log.outcome, RunOutcome::ReachedGoal, "{:#?}", log.replans.last());

    // Safety accounting: reaching the goal implies the hard radius was
    // never breached, and the log must show it.
    assert!(log.min_clearance >= cfg.hard_radius);
    assert!(log.samples.iter().all(|s| s.clearance >= cfg.hard_radius));

    // Timestamps strictly increase and plan ids only ever grow.
    for w in log.samples.windows(2) {
        assert!(w[1].t > w[0].t);
        assert!(w[1].plan_id >= w[0].plan_id);
    }
    // At least one replan succeeded and the turn was flown post-stall.
    assert!(log.replans.iter().any(|r| r.activated));
    assert!(
        log.peak_wing_aoa() > 25.0f64.to_radians(),
        "peak wing aoa {:.1} deg",
        log.peak_wing_aoa().to_degrees()
    );
}

#[test]
fn lockstep_runs_are_deterministic() {
    let mut cfg = RunConfig::default();
    cfg.rng_seed = 3;
    cfg.max_sim_time = 1.4;
    let a = closed_loop_run(&corner(), &cfg).unwrap();
    let b = closed_loop_run(&corner(), &cfg).unwrap();
    assert_eq!(a.samples.len(), b.samples.len());
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        assert_eq!(sa.t, sb.t);
        assert_eq!(sa.state, sb.state);
        assert_eq!(sa.input, sb.input);
        assert_eq!(sa.plan_id, sb.plan_id);
    }
    assert_eq!(a.min_clearance, b.min_clearance);
}

#[test]
fn benchmark_produces_sane_rows() {
    let rows =
        benchmark_knots(crate::trajopt::Transcription::HermiteSimpson, &[10], 1, false, 5)
            .unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row.n, 10);
    assert!(row.feasibility > 0.99, "feasibility {}", row.feasibility);
    assert!(row.solve_time > 0.0 && row.dynamics_time > 0.0);
    assert!(row.dynamics_time < row.solve_time);
    assert!(row.following_cost.is_finite());
}

#[test]
fn turn_radius_blows_up_in_the_straight_flight_limit() {
    assert!(turn_radius(3.0, 0.0).is_infinite());
    assert!((turn_radius(3.0, 1.5) - 2.0).abs() < 1e-12);
}

#[test]
fn steady_turns_tighten_with_the_angle_of_attack_cap() {
    let params = AircraftParams::edge540_24in();
    let caps: Vec<f64> = (2..=14).map(|i| (5.0 * i as f64).to_radians()).collect();
    let results = trim_turn_radius(&caps, (0.5, 10.0), &params).unwrap();
    assert_eq!(results.len(), caps.len());
    for r in &results {
        assert!(r.radius > 0.0 && r.radius.is_finite());
        assert!(r.residual < 1e-8, "residual {:.2e}", r.residual);
        assert!(r.alpha <= r.alpha_cap + 1e-12);
        assert!(r.thrust >= 0.0);
    }
    for w in results.windows(2) {
        assert!(
            w[1].radius <= w[0].radius + 1e-9,
            "radius not monotone: {} deg -> {:.3} m, {} deg -> {:.3} m",
            w[0].alpha_cap.to_degrees(),
            w[0].radius,
            w[1].alpha_cap.to_degrees(),
            w[1].radius
        );
    }
    let r15 = results[1].radius;
    let r60 = results[10].radius;
    assert!((results[1].alpha_cap - 15.0f64.to_radians()).abs() < 1e-9);
    assert!((results[10].alpha_cap - 60.0f64.to_radians()).abs() < 1e-9);
    assert!(
        r60 < 0.5 * r15,
        "post-stall advantage too small: r(15)={r15:.3}, r(60)={r60:.3}"
    );
}
