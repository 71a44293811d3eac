//! Solve the built-in 33-bus feeder at its nominal load and print the
//! network state: convergence, losses, voltage profile extremes and the
//! power drawn from the transmission interface.

use vppflex::grid::{build_ieee33, StudyCase};
use vppflex::{solve_power_flow, InjectionSet, SolverSettings};

fn main() {
    for case in [StudyCase::I, StudyCase::II, StudyCase::III] {
        let network = build_ieee33(case);
        // loads only, every DER at zero output
        let injections = InjectionSet::from_loads(&network);
        let sol = solve_power_flow(&network, &injections, SolverSettings::default());

        let (p, q) = sol.dispatch_power();
        println!("Case {case:?} ({} buses, {} branches):", network.buses.len(), network.branches.len());
        println!("  converged in {} iterations: {}", sol.iterations, sol.converged);
        println!("  min voltage      {:.4} pu", sol.min_voltage_pu());
        println!("  network losses   {:.1} kW", sol.total_losses_kw());
        println!("  interface power  {:.1} kW / {:.1} kvar (export-positive)", p, q);
    }
}
