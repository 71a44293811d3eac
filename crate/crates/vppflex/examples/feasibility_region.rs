//! Estimate the feasibility operating region (FOR) of the built-in VPP:
//! draw random fleet set-points, screen each through an AC power flow, and
//! keep the interface powers that violate no network limit. Prints the
//! discard tally, the convex-hull approximation of the FOR boundary and
//! the raise/lower split around the hull centroid.

use vppflex::fleet::builtin_fleet;
use vppflex::geometry::hull_centroid;
use vppflex::grid::{build_ieee33, StudyCase};
use vppflex::{compute_for, split_ancillary, SampleConfig, SolverSettings};

fn main() -> Result<(), vppflex::Error> {
    let network = build_ieee33(StudyCase::I);
    let specs = builtin_fleet(&network);
    let config = SampleConfig {
        count: 5000,
        seed: 42,
        ..Default::default()
    };

    let result = compute_for(&network, &specs, &config, SolverSettings::default(), true)?;
    println!(
        "{} feasible points out of {} samples ({} discarded: {:?})",
        result.points.len(),
        config.count,
        result.discarded_count,
        result.discard_tally
    );

    let hull = result.hull()?;
    println!(
        "hull: {} vertices, area {:.0} kW·kvar",
        hull.vertices.len(),
        hull.area_kw_kvar
    );
    for (p, q) in &hull.vertices {
        println!("  ({p:8.1} kW, {q:8.1} kvar)");
    }

    let dispatch = hull_centroid(&hull);
    let split = split_ancillary(&result, &hull, dispatch);
    println!(
        "around dispatch ({:.1}, {:.1}): {} raise points, {} lower points, {} pure-reactive",
        dispatch.0,
        dispatch.1,
        split.raise.len(),
        split.lower.len(),
        split.zero.len()
    );
    Ok(())
}
