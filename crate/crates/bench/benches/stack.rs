//! Benchmarks for the hot paths of the stack: dynamics evaluation,
//! distance-field queries, a full collocation solve, and policy
//! synthesis.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use poststall::dynamics::state_derivative_vec;
use poststall::environment::{build_field, HallwaySpec};
use poststall::harness::{plan_corridor, rk4_step};
use poststall::params::AircraftParams;
use poststall::state::{InputVec, StateVec};
use poststall::trajopt::{seed_from_path, solve, Bounds, NlpProblem, SolverConfig, Transcription};
use poststall::tvlqr::{riccati_backward, TvlqrWeights};

fn flight_state() -> (StateVec, InputVec) {
    let mut x = StateVec::zeros();
    x[2] = -1.2;
    x[4] = 0.3;
    x[10] = 0.5;
    x[11] = 3.0;
    x[13] = 0.4;
    x[15] = 0.2;
    let mut u = InputVec::zeros();
    u[2] = 0.5;
    u[4] = 0.6;
    (x, u)
}

fn bench_dynamics(c: &mut Criterion) {
    let params = AircraftParams::edge540_24in();
    let (x, u) = flight_state();
    c.bench_function("dynamics/state_derivative", |b| {
        b.iter(|| state_derivative_vec(std::hint::black_box(&x), &u, &params).unwrap())
    });
    c.bench_function("dynamics/rk4_step", |b| {
        b.iter(|| rk4_step(std::hint::black_box(&x), &u, 1e-3, &params).unwrap())
    });
}

fn bench_environment(c: &mut Criterion) {
    let spec = HallwaySpec::corner(1.75, 2.5, 4.0);
    let field = build_field(&spec, 0.05, 5.0).unwrap();
    let p = nalgebra::Vector3::new(1.0, 0.3, -1.2);
    c.bench_function("environment/min_distance", |b| {
        b.iter(|| field.min_distance(std::hint::black_box(&p)))
    });
    c.bench_function("environment/build_field", |b| {
        b.iter(|| build_field(&spec, 0.1, 5.0).unwrap())
    });
}

fn bench_trajopt(c: &mut Criterion) {
    let spec = HallwaySpec::corner(1.75, 2.5, 4.0);
    let field = build_field(&spec, 0.05, 5.0).unwrap();
    let params = AircraftParams::edge540_24in();
    let bounds = Bounds::flight_envelope();
    let tp = plan_corridor(&field, spec.start, spec.goal, 0.55, 2.0, 4.0, 1.0, 42).unwrap();
    let n = 10;
    let seed = seed_from_path(&tp, 0.0, n, 1.0, &params, &bounds);
    let f = |x: &StateVec, u: &InputVec| state_derivative_vec(x, u, &params);
    let problem = NlpProblem {
        n,
        method: Transcription::HermiteSimpson,
        bounds,
        x_init: seed.states[0],
        tol_init: Bounds::endpoint_tolerance(),
        x_final: seed.states[n],
        tol_final: Bounds::endpoint_tolerance(),
        field: Some(&field),
        radius: 0.55,
    };
    let solver = SolverConfig {
        max_outer: 30,
        max_inner: 200,
        ..SolverConfig::default()
    };
    let mut group = c.benchmark_group("trajopt");
    group.sample_size(10);
    group.bench_function("solve_hs_n10", |b| {
        b.iter_batched(
            || seed.clone(),
            |s| solve(&problem, &f, &s, None, &solver).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();

    let base = solve(&problem, &f, &seed, None, &solver).unwrap();
    let weights = TvlqrWeights::default();
    let mut group = c.benchmark_group("tvlqr");
    group.sample_size(20);
    group.bench_function("riccati_backward_n10", |b| {
        b.iter(|| {
            riccati_backward(
                &base.trajectory,
                &params,
                &weights,
                4,
                bounds.u_min,
                bounds.u_max,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn bench_planner(c: &mut Criterion) {
    let spec = HallwaySpec::corner(1.75, 2.5, 4.0);
    let field = build_field(&spec, 0.05, 5.0).unwrap();
    let mut group = c.benchmark_group("planner");
    group.sample_size(20);
    group.bench_function("plan_corridor", |b| {
        b.iter(|| plan_corridor(&field, spec.start, spec.goal, 0.55, 2.0, 4.0, 1.0, 42).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_dynamics,
    bench_environment,
    bench_planner,
    bench_trajopt
);
criterion_main!(benches);
