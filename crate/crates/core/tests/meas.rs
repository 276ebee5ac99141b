use poststall::harness::*;
use poststall::trajopt::Transcription;

#[test]
#[ignore]
fn measure_knot_study() {
    for (m, ns) in [
        (Transcription::HermiteSimpson, vec![10usize]),
        (Transcription::Euler, vec![10, 14, 18, 20]),
    ] {
        let rows = benchmark_knots(m, &ns, 5, false, 42).unwrap();
        for r in &rows {
            println!(
                "{m:?} n={} feas={:.2} solve={:.3} dyn={:.3} cost={:.3}",
                r.n, r.feasibility, r.solve_time, r.dynamics_time, r.following_cost
            );
        }
    }
}

#[test]
#[ignore]
fn measure_warm_study() {
    let (cold, warm) = warm_start_study(10, 20, 7).unwrap();
    println!("cold median {cold:.3} warm median {warm:.3} ratio {:.2}", cold / warm);
}
