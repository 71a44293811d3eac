//! Monte Carlo estimation of the feasibility operating region (FOR).
//!
//! For every sampled fleet operating point the nodal injections are
//! assembled, an AC power flow is solved, and the sample is either
//! discarded on a network-limit violation or retained with its interface
//! dispatch power. The retained dispatch powers form the FOR point cloud;
//! its convex hull is an outer approximation of the (possibly non-convex)
//! true boundary.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fleet::{validate_fleet, OperatingPoint, ResourceSpec};
use crate::geometry::{hull_contains, Hull};
use crate::grid::Network;
use crate::powerflow::{
    check_constraints, solve_power_flow, InjectionSet, SolverSettings, ViolationKind,
};
use crate::sampling::{sample_one, SampleConfig};
use crate::Result;

/// One feasible interface exchange, export-positive, with the retained
/// operating point that realizes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForPoint {
    pub s_lambda: (f64, f64),
    /// Index into [`ForResult::retained_ops`].
    pub operating_point_index: usize,
}

/// Per-sample trace kept for artifact emission: every sample appears once,
/// feasible or not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_index: usize,
    /// Interface exchange when the power flow converged (even if limits
    /// were violated); `None` on nonconvergence.
    pub s_lambda: Option<(f64, f64)>,
    pub violation: Option<ViolationKind>,
}

impl SampleRecord {
    pub fn is_feasible(&self) -> bool {
        self.violation.is_none()
    }
}

/// Output of the FOR computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForResult {
    /// Feasible interface points, in sample order.
    pub points: Vec<ForPoint>,
    /// The retained operating points (the feasible set), parallel to
    /// `points`.
    pub retained_ops: Vec<OperatingPoint>,
    /// One record per sample, feasible and discarded alike.
    pub records: Vec<SampleRecord>,
    pub discarded_count: usize,
    /// Discards per violation kind (the first violation of a sample
    /// decides its tally bucket).
    pub discard_tally: BTreeMap<ViolationKind, usize>,
    pub sample_config: SampleConfig,
}

impl ForResult {
    pub fn feasible_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().map(|p| p.s_lambda)
    }

    /// Convex hull of the feasible point cloud. Errors when the FOR is
    /// empty.
    pub fn hull(&self) -> Result<Hull> {
        let pts: Vec<(f64, f64)> = self.feasible_points().collect();
        crate::geometry::convex_hull(&pts)
    }
}

/// Assembles the nodal injections for one fleet operating point:
/// `-(load)` at every non-slack bus plus each resource's output (a
/// flexible load's shed is a positive injection).
pub fn assemble_injections(
    network: &Network,
    specs: &[ResourceSpec],
    point: &OperatingPoint,
) -> Result<InjectionSet> {
    if point.len() != specs.len() {
        return Err(Error::Fleet(format!(
            "operating point has {} entries for a fleet of {}",
            point.len(),
            specs.len()
        )));
    }
    let mut inj = InjectionSet::from_loads(network);
    for (spec, state) in specs.iter().zip(&point.0) {
        inj.add(spec.bus, state.p_kw, state.q_kvar)?;
    }
    Ok(inj)
}

fn evaluate_sample(
    network: &Network,
    specs: &[ResourceSpec],
    point: &OperatingPoint,
    settings: SolverSettings,
) -> Result<(Option<(f64, f64)>, Option<ViolationKind>)> {
    let inj = assemble_injections(network, specs, point)?;
    let sol = solve_power_flow(network, &inj, settings);
    let report = check_constraints(network, &sol)?;
    let s_lambda = sol.converged.then(|| sol.dispatch_power());
    let violation = report.violations.first().map(|v| v.kind);
    Ok((s_lambda, violation))
}

/// Runs the Monte Carlo feasibility sweep.
///
/// Deterministic for fixed inputs regardless of `parallel`; samples are
/// evaluated independently and merged in sample order. Nonconvergent
/// samples count as discards, never as failures.
pub fn compute_for(
    network: &Network,
    specs: &[ResourceSpec],
    config: &SampleConfig,
    settings: SolverSettings,
    parallel: bool,
) -> Result<ForResult> {
    network.validate()?;
    validate_fleet(specs, network)?;
    config.validate()?;

    let indices: Vec<u64> = (0..config.count as u64).collect();
    let evaluate = |&i: &u64| -> Result<(OperatingPoint, Option<(f64, f64)>, Option<ViolationKind>)> {
        let point = sample_one(specs, config, i);
        let (s, v) = evaluate_sample(network, specs, &point, settings)?;
        Ok((point, s, v))
    };
    let evaluated: Vec<_> = if parallel {
        indices.par_iter().map(evaluate).collect::<Result<_>>()?
    } else {
        indices.iter().map(evaluate).collect::<Result<_>>()?
    };

    let mut result = ForResult {
        points: Vec::new(),
        retained_ops: Vec::new(),
        records: Vec::with_capacity(config.count),
        discarded_count: 0,
        discard_tally: BTreeMap::new(),
        sample_config: *config,
    };
    for (i, (point, s_lambda, violation)) in evaluated.into_iter().enumerate() {
        result.records.push(SampleRecord {
            sample_index: i,
            s_lambda,
            violation,
        });
        match violation {
            None => {
                let s = s_lambda.expect("feasible sample always has a converged solution");
                result.points.push(ForPoint {
                    s_lambda: s,
                    operating_point_index: result.retained_ops.len(),
                });
                result.retained_ops.push(point);
            }
            Some(kind) => {
                result.discarded_count += 1;
                *result.discard_tally.entry(kind).or_insert(0) += 1;
            }
        }
    }
    Ok(result)
}

/// FCAS decomposition of the FOR around a dispatch point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AncillarySplit {
    /// Indices into `ForResult::points` with ΔP > 0.
    pub raise: Vec<usize>,
    /// Indices with ΔP < 0.
    pub lower: Vec<usize>,
    /// ΔP = 0 points (pure reactive deviation); these belong to both
    /// service directions.
    pub zero: Vec<usize>,
    /// False when the dispatch point lies outside the FOR hull; the split
    /// is still computed.
    pub dispatch_inside_hull: bool,
}

/// Splits the FOR into FCAS raise and lower candidate sets relative to a
/// dispatch point: ΔS = S^λ − dispatch per feasible point.
pub fn split_ancillary(
    for_result: &ForResult,
    hull: &Hull,
    dispatch: (f64, f64),
) -> AncillarySplit {
    let mut split = AncillarySplit {
        raise: Vec::new(),
        lower: Vec::new(),
        zero: Vec::new(),
        dispatch_inside_hull: hull_contains(hull, dispatch),
    };
    for (i, p) in for_result.points.iter().enumerate() {
        let dp = p.s_lambda.0 - dispatch.0;
        if dp > 0.0 {
            split.raise.push(i);
        } else if dp < 0.0 {
            split.lower.push(i);
        } else {
            split.zero.push(i);
        }
    }
    split
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{builtin_fleet, ResourceKind, ResourceState};
    use crate::grid::{build_ieee33, load_network, StudyCase};
    use crate::powerflow::SolverSettings;

    fn lossless_two_bus(load_kw: f64, load_kvar: f64) -> Network {
        let bus = format!(
            "id,kind,p_load_kw,q_load_kvar,v_min_pu,v_max_pu,flexible_fraction\n\
             1,slack,0,0,0.5,1.5,0\n\
             2,load,{load_kw},{load_kvar},0.5,1.5,0\n"
        );
        let branch = "from,to,r_ohm,x_ohm,thermal_limit_kva,is_switch,closed\n\
                      1,2,0,0,,false,true\n";
        load_network(&bus, branch, 100.0, 12.66).unwrap()
    }

    fn one_diesel(bus: u32) -> Vec<ResourceSpec> {
        vec![ResourceSpec {
            id: "d".into(),
            bus,
            kind: ResourceKind::DieselGen {
                p_min_kw: 100.0,
                p_max_kw: 100.0001,
                q_min_kvar: -0.0001,
                q_max_kvar: 0.0001,
                activation_s: 15.0,
                ramp_full_range_s: 20.0,
            },
        }]
    }

    #[test]
    fn lossless_power_balance() {
        // 100 kW diesel always on, 50 kW load, no impedance: the single FOR
        // point is ~(+50, -q_load) export
        let n = lossless_two_bus(50.0, 10.0);
        let specs = one_diesel(2);
        let cfg = SampleConfig {
            count: 8,
            diesel_on_probability: 1.0,
            ..Default::default()
        };
        let r = compute_for(&n, &specs, &cfg, SolverSettings::default(), false).unwrap();
        assert_eq!(r.points.len(), 8);
        for p in &r.points {
            assert!((p.s_lambda.0 - 50.0).abs() < 1e-3, "{:?}", p.s_lambda);
            assert!((p.s_lambda.1 - (-10.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn counts_always_reconcile() {
        let n = build_ieee33(StudyCase::I);
        let specs = builtin_fleet(&n);
        let cfg = SampleConfig {
            count: 200,
            ..Default::default()
        };
        let r = compute_for(&n, &specs, &cfg, SolverSettings::default(), true).unwrap();
        assert_eq!(r.points.len(), r.retained_ops.len());
        assert_eq!(r.points.len() + r.discarded_count, cfg.count);
        assert_eq!(r.records.len(), cfg.count);
        let tallied: usize = r.discard_tally.values().sum();
        assert_eq!(tallied, r.discarded_count);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let n = build_ieee33(StudyCase::I);
        let specs = builtin_fleet(&n);
        let cfg = SampleConfig {
            count: 100,
            ..Default::default()
        };
        let a = compute_for(&n, &specs, &cfg, SolverSettings::default(), false).unwrap();
        let b = compute_for(&n, &specs, &cfg, SolverSettings::default(), true).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn rescreening_retained_points_is_clean() {
        let n = build_ieee33(StudyCase::I);
        let specs = builtin_fleet(&n);
        let cfg = SampleConfig {
            count: 60,
            ..Default::default()
        };
        let r = compute_for(&n, &specs, &cfg, SolverSettings::default(), false).unwrap();
        for op in &r.retained_ops {
            let (s, v) = evaluate_sample(&n, &specs, op, SolverSettings::default()).unwrap();
            assert!(v.is_none());
            assert!(s.is_some());
        }
    }

    #[test]
    fn widening_limits_never_shrinks_the_for() {
        let n = build_ieee33(StudyCase::I);
        let specs = builtin_fleet(&n);
        let cfg = SampleConfig {
            count: 150,
            ..Default::default()
        };
        let tight = compute_for(&n, &specs, &cfg, SolverSettings::default(), false).unwrap();
        let mut wide = n.clone();
        for b in &mut wide.buses {
            b.v_min_pu = 0.5;
            b.v_max_pu = 1.5;
        }
        let relaxed = compute_for(&wide, &specs, &cfg, SolverSettings::default(), false).unwrap();
        assert!(relaxed.points.len() >= tight.points.len());
        // every sample retained under tight limits stays retained
        for (t, w) in tight.records.iter().zip(&relaxed.records) {
            if t.is_feasible() {
                assert!(w.is_feasible());
            }
        }
    }

    #[test]
    fn case_i_embeds_into_case_ii() {
        // Case I retained operating points, extended with zero shed,
        // remain feasible on the Case II network with identical dispatch
        let n1 = build_ieee33(StudyCase::I);
        let n2 = build_ieee33(StudyCase::II);
        let specs1 = builtin_fleet(&n1);
        let specs2 = builtin_fleet(&n2);
        let cfg = SampleConfig {
            count: 80,
            ..Default::default()
        };
        let r1 = compute_for(&n1, &specs1, &cfg, SolverSettings::default(), false).unwrap();
        for (p, op) in r1.points.iter().zip(&r1.retained_ops) {
            let mut extended = op.clone();
            extended
                .0
                .extend(std::iter::repeat(ResourceState::at(0.0, 0.0)).take(specs2.len() - specs1.len()));
            let (s, v) = evaluate_sample(&n2, &specs2, &extended, SolverSettings::default()).unwrap();
            assert!(v.is_none());
            let s = s.unwrap();
            assert!((s.0 - p.s_lambda.0).abs() < 1e-6);
            assert!((s.1 - p.s_lambda.1).abs() < 1e-6);
        }
    }

    #[test]
    fn ancillary_split_covers_all_points() {
        let n = build_ieee33(StudyCase::I);
        let specs = builtin_fleet(&n);
        let cfg = SampleConfig {
            count: 200,
            ..Default::default()
        };
        let r = compute_for(&n, &specs, &cfg, SolverSettings::default(), false).unwrap();
        let hull = r.hull().unwrap();
        let centroid = crate::geometry::hull_centroid(&hull);
        let split = split_ancillary(&r, &hull, centroid);
        assert!(split.dispatch_inside_hull);
        // brute-force sign count over the retained points
        let raise_expect = r.points.iter().filter(|p| p.s_lambda.0 > centroid.0).count();
        let lower_expect = r.points.iter().filter(|p| p.s_lambda.0 < centroid.0).count();
        assert_eq!(split.raise.len(), raise_expect);
        assert_eq!(split.lower.len(), lower_expect);
        assert!(!split.raise.is_empty() && !split.lower.is_empty());
        assert_eq!(
            split.raise.len() + split.lower.len() + split.zero.len(),
            r.points.len()
        );
    }

    #[test]
    fn dispatch_equal_to_a_for_point_self_deviates_to_zero() {
        let n = build_ieee33(StudyCase::I);
        let specs = builtin_fleet(&n);
        let cfg = SampleConfig {
            count: 30,
            ..Default::default()
        };
        let r = compute_for(&n, &specs, &cfg, SolverSettings::default(), false).unwrap();
        let p0 = r.points[0].s_lambda;
        let hull = r.hull().unwrap();
        let split = split_ancillary(&r, &hull, p0);
        assert!(split.zero.contains(&0));
    }

    #[test]
    fn dispatch_at_min_p_vertex_empties_lower() {
        let n = build_ieee33(StudyCase::I);
        let specs = builtin_fleet(&n);
        let cfg = SampleConfig {
            count: 50,
            ..Default::default()
        };
        let r = compute_for(&n, &specs, &cfg, SolverSettings::default(), false).unwrap();
        let min_p = r
            .points
            .iter()
            .map(|p| p.s_lambda.0)
            .fold(f64::INFINITY, f64::min);
        let vertex = r.points.iter().find(|p| p.s_lambda.0 == min_p).unwrap();
        let hull = r.hull().unwrap();
        let split = split_ancillary(&r, &hull, vertex.s_lambda);
        assert!(split.lower.is_empty());
    }

    #[test]
    fn case_iii_discards_at_least_as_many_as_case_i() {
        let cfg = SampleConfig {
            count: 300,
            ..Default::default()
        };
        let n1 = build_ieee33(StudyCase::I);
        let n3 = build_ieee33(StudyCase::III);
        let specs = builtin_fleet(&n1);
        let r1 = compute_for(&n1, &specs, &cfg, SolverSettings::default(), true).unwrap();
        let r3 = compute_for(&n3, &specs, &cfg, SolverSettings::default(), true).unwrap();
        assert!(r3.discarded_count >= r1.discarded_count);
    }
}
