//! Compute the flexibility operating regions (FXOR) of the built-in VPP:
//! from the fleet set-point realizing a dispatch near the FOR centroid,
//! how much of the FOR is reachable within each time horizon? Short
//! horizons are gated by diesel activation delays; by five minutes the
//! whole FOR is reachable.

use vppflex::fleet::builtin_fleet;
use vppflex::flexibility::select_dispatch_op;
use vppflex::geometry::hull_centroid;
use vppflex::grid::{build_ieee33, StudyCase};
use vppflex::{compute_for, compute_fxor, FxorRequest, SampleConfig, SolverSettings};

fn main() -> Result<(), vppflex::Error> {
    let network = build_ieee33(StudyCase::I);
    let specs = builtin_fleet(&network);
    let config = SampleConfig {
        count: 5000,
        seed: 42,
        ..Default::default()
    };
    let result = compute_for(&network, &specs, &config, SolverSettings::default(), true)?;

    let dispatch = hull_centroid(&result.hull()?);
    let op_index = select_dispatch_op(&result, dispatch)?;
    let request = FxorRequest {
        dispatch,
        dispatch_operating_point: result.retained_ops[op_index].clone(),
        horizons_s: vec![1.0, 6.0, 30.0, 60.0, 120.0, 300.0],
    };
    let fxor = compute_fxor(&result, &specs, &request)?;

    println!(
        "dispatch ({:.1} kW, {:.1} kvar), FOR has {} points",
        dispatch.0,
        dispatch.1,
        result.points.len()
    );
    for (tau, members) in request.horizons_s.iter().zip(&fxor.memberships) {
        println!(
            "  X_{tau:>5}s: {:5} points ({:5.1}% of FOR)",
            members.len(),
            100.0 * members.len() as f64 / result.points.len() as f64
        );
    }

    let slowest = fxor.min_time_s.iter().cloned().fold(0.0, f64::max);
    println!("slowest transition in the FOR: {slowest:.2} s");
    Ok(())
}
