//! Evaluate the six FCAS contingency capacities of the built-in VPP at a
//! dispatch point: raise and lower headroom deliverable within the fast
//! (6 s), slow (60 s) and delayed (5 min) windows.

use vppflex::fleet::builtin_fleet;
use vppflex::flexibility::{select_dispatch_op, FCAS_WINDOWS_S};
use vppflex::geometry::hull_centroid;
use vppflex::grid::{build_ieee33, StudyCase};
use vppflex::{
    classify_fcas, compute_for, compute_fxor, FxorRequest, SampleConfig, SolverSettings,
};

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
        horizons_s: FCAS_WINDOWS_S.to_vec(),
    };
    let fxor = compute_fxor(&result, &specs, &request)?;
    let envelope = classify_fcas(&fxor, &result, dispatch)?;

    println!("dispatch ({:.1} kW, {:.1} kvar)", dispatch.0, dispatch.1);
    for w in &envelope.windows {
        println!(
            "  {:>5} s window: raise {:7.1} kW ({} points), lower {:7.1} kW ({} points)",
            w.window_s,
            w.raise_kw,
            w.raise_members.len(),
            w.lower_kw,
            w.lower_members.len()
        );
    }
    Ok(())
}
