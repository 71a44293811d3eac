//! Feasibility and flexibility operating regions of DER aggregations.
//!
//! A virtual power plant (VPP) aggregates distributed energy resources
//! (diesel generators, PV, batteries, flexible loads) behind a distribution
//! network and trades the aggregate at the TSO/DSO interface. This crate
//! computes, by Monte Carlo screening through an AC power flow:
//!
//! - the **feasibility operating region (FOR)**: every interface (P, Q)
//!   exchange the aggregation can realize without violating network limits;
//! - the **flexibility operating regions (FXOR)**: the subsets of the FOR
//!   reachable from a given dispatch point within a time horizon, driven by
//!   resource activation and ramp times;
//! - **FCAS envelopes**: raise/lower capacities at the 6 s / 60 s / 5 min
//!   contingency service windows.
//!
//! The pipeline is: [`grid`] builds or loads a network (a modified IEEE
//! 33-bus feeder ships built in), [`fleet`] describes resource PQ
//! capabilities and response times, [`sampling`] draws correlated random
//! operating points, [`powerflow`] solves and screens each one,
//! [`feasibility`] accumulates the FOR, [`flexibility`] derives the FXOR
//! and FCAS envelopes, and [`runner`] ties it together behind scenario
//! configs and file artifacts. See the crate examples for end-to-end runs.

pub mod error;
pub mod feasibility;
pub mod fleet;
pub mod flexibility;
pub mod geometry;
pub mod grid;
pub mod powerflow;
pub mod runner;
pub mod sampling;

pub use error::Error;
pub use feasibility::{compute_for, split_ancillary, ForPoint, ForResult};
pub use fleet::{
    capability_contains, fleet_transition_time, transition_time, OperatingPoint, ResourceKind,
    ResourceSpec, ResourceState,
};
pub use flexibility::{classify_fcas, compute_fxor, FcasEnvelope, FxorRequest, FxorResult};
pub use geometry::{convex_hull, hull_area, hull_contains, Hull};
pub use grid::{Branch, Bus, BusKind, Network, StudyCase};
pub use powerflow::{
    check_constraints, solve_power_flow, InjectionSet, PowerFlowSolution, SolverSettings,
    ViolationKind, ViolationReport,
};
pub use sampling::{sample_operating_points, SampleConfig};

/// Library result alias.
pub type Result<T> = std::result::Result<T, Error>;
