//! Acceptance gate: one test per acceptance criterion, each printing a
//! single PASS/FAIL line (visible with `cargo test --test acceptance --
//! --nocapture`). Oracles here are implemented independently of the
//! library's solver path.

use std::collections::BTreeSet;
use std::time::Instant;

use num_complex::Complex64;

use vppflex::fleet::{builtin_fleet, ResourceKind, ResourceSpec, ResourceState};
use vppflex::flexibility::{select_dispatch_op, FCAS_WINDOWS_S};
use vppflex::geometry::hull_centroid;
use vppflex::grid::{build_ieee33, load_network, Network, StudyCase};
use vppflex::runner::{run_case_suite, ScenarioConfig};
use vppflex::sampling::sample_operating_points;
use vppflex::{
    classify_fcas, compute_for, compute_fxor, fleet_transition_time, solve_power_flow,
    transition_time, ForResult, FxorRequest, InjectionSet, OperatingPoint, SampleConfig,
    SolverSettings,
};

fn verdict(n: u32, what: &str, ok: bool, detail: String) {
    let line = format!(
        "{}: criterion {n} ({what}) — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    println!("{line}");
    assert!(ok, "{line}");
}

// ---------------------------------------------------------------------------
// Criterion 1 oracle: backward/forward sweep power flow on a radial network.
// Shares no code with the Newton–Raphson path.
// ---------------------------------------------------------------------------

/// Returns (losses_kw, min_voltage_pu) for the loads-only state of a radial
/// network, by repeated backward current accumulation and forward voltage
/// drops over the spanning tree rooted at the slack bus.
fn sweep_solve(network: &Network) -> (f64, f64) {
    let z_base = network.base_kv * network.base_kv / network.base_mva; // ohm
    let n = network.buses.len();
    let idx = |id: u32| network.buses.iter().position(|b| b.id == id).unwrap();
    let slack = network
        .buses
        .iter()
        .position(|b| b.kind == vppflex::BusKind::Slack)
        .unwrap();

    // children adjacency over closed branches, plus a BFS ordering
    let mut adj: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
    for br in network.branches.iter().filter(|b| b.closed) {
        let z = Complex64::new(br.r_ohm / z_base, br.x_ohm / z_base);
        adj[idx(br.from_bus)].push((idx(br.to_bus), z));
        adj[idx(br.to_bus)].push((idx(br.from_bus), z));
    }
    let mut parent: Vec<Option<(usize, Complex64)>> = vec![None; n];
    let mut order = vec![slack];
    let mut seen = vec![false; n];
    seen[slack] = true;
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &(v, z) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some((u, z));
                order.push(v);
            }
        }
    }
    assert!(order.len() == n, "sweep oracle requires a connected radial network");

    // constant-power loads, pu
    let s_load: Vec<Complex64> = network
        .buses
        .iter()
        .map(|b| Complex64::new(b.p_load_kw, b.q_load_kvar) / (network.base_mva * 1e3))
        .collect();

    let mut v = vec![Complex64::new(1.0, 0.0); n];
    for _ in 0..200 {
        // backward: branch current into each bus's subtree
        let mut i_sub: Vec<Complex64> = (0..n).map(|k| (s_load[k] / v[k]).conj()).collect();
        for &u in order.iter().rev() {
            if let Some((p, _)) = parent[u] {
                let flow = i_sub[u];
                i_sub[p] += flow;
            }
        }
        // forward: voltage drops from the slack outward
        let mut max_dv: f64 = 0.0;
        for &u in &order {
            if let Some((p, z)) = parent[u] {
                let new_v = v[p] - z * i_sub[u];
                max_dv = max_dv.max((new_v - v[u]).norm());
                v[u] = new_v;
            }
        }
        if max_dv < 1e-10 {
            break;
        }
    }

    let mut losses_pu = 0.0;
    for u in 0..n {
        if let Some((_, z)) = parent[u] {
            let i = (s_load[u] / v[u]).conj()
                + order
                    .iter()
                    .filter(|&&c| parent[c].map(|(p, _)| p) == Some(u))
                    .map(|&c| branch_current(&parent, &s_load, &v, c))
                    .sum::<Complex64>();
            losses_pu += i.norm_sqr() * z.re;
        }
    }
    let min_v = v
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != slack)
        .map(|(_, x)| x.norm())
        .fold(f64::INFINITY, f64::min);
    (losses_pu * network.base_mva * 1e3, min_v)
}

/// Current flowing from `parent(u)` into bus `u`'s subtree.
fn branch_current(
    parent: &[Option<(usize, Complex64)>],
    s_load: &[Complex64],
    v: &[Complex64],
    u: usize,
) -> Complex64 {
    let own = (s_load[u] / v[u]).conj();
    let children: Complex64 = (0..parent.len())
        .filter(|&c| parent[c].map(|(p, _)| p) == Some(u))
        .map(|c| branch_current(parent, s_load, v, c))
        .sum();
    own + children
}

#[test]
fn criterion_1_power_flow_reference() {
    let t0 = Instant::now();
    // radial base case: ties open, DER off
    let network = build_ieee33(StudyCase::III);
    let sol = solve_power_flow(
        &network,
        &InjectionSet::from_loads(&network),
        SolverSettings::default(),
    );
    let (ref_losses, ref_minv) = sweep_solve(&network);
    let loss_err = (sol.total_losses_kw() - ref_losses).abs() / ref_losses;
    let minv_err = (sol.min_voltage_pu() - ref_minv).abs() / ref_minv;

    // two-bus closed form: P = 0.1 pu load, r = x = 0.1 pu
    let bus = "id,kind,p_load_kw,q_load_kvar,v_min_pu,v_max_pu,flexible_fraction\n\
               1,slack,0,0,0.5,1.5,0\n\
               2,load,10000,0,0.5,1.5,0\n";
    let z = 0.1 * (12.66f64 * 12.66 / 100.0); // 0.1 pu in ohm
    let branch = format!(
        "from,to,r_ohm,x_ohm,thermal_limit_kva,is_switch,closed\n1,2,{z},{z},,false,true\n"
    );
    let two = load_network(bus, &branch, 100.0, 12.66).unwrap();
    let sol2 = solve_power_flow(&two, &InjectionSet::from_loads(&two), SolverSettings::default());
    // |V2|^4 + (2(PR+QX) − 1)|V2|^2 + (P^2+Q^2)|Z|^2 = 0, P=0.1, Q=0, R=X=0.1
    let (p, r, x) = (0.1f64, 0.1f64, 0.1f64);
    let b = 2.0 * p * r - 1.0;
    let c = p * p * (r * r + x * x);
    let v2_ref = ((-b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt();
    let v2 = sol2.vm_pu[1];
    let elapsed = t0.elapsed();

    let ok = sol.converged
        && loss_err < 0.005
        && minv_err < 0.005
        && (v2 - v2_ref).abs() < 1e-6
        && (v2_ref - 0.9899).abs() < 1e-4
        && elapsed.as_secs_f64() < 1.0;
    verdict(
        1,
        "power-flow vs independent references",
        ok,
        format!(
            "loss err {:.4}%, minV err {:.4}%, |V2| {:.7} vs {:.7}, {:.0} ms",
            100.0 * loss_err,
            100.0 * minv_err,
            v2,
            v2_ref,
            elapsed.as_secs_f64() * 1e3
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: copper-plate Minkowski-sum equivalence.
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_copper_plate_minkowski() {
    let t0 = Instant::now();
    let mut network = build_ieee33(StudyCase::I);
    for br in &mut network.branches {
        br.r_ohm = 0.0;
        br.x_ohm = 0.0;
        br.thermal_limit_kva = None;
        br.closed = true;
    }
    for b in &mut network.buses {
        b.v_min_pu = 0.01;
        b.v_max_pu = 10.0;
    }
    let specs = builtin_fleet(&network);
    let config = SampleConfig {
        count: 10_000,
        seed: 42,
        ..Default::default()
    };
    let result = compute_for(&network, &specs, &config, SolverSettings::default(), true).unwrap();

    // independent oracle: resample identically and sum capabilities directly
    let ops = sample_operating_points(&specs, &config).unwrap();
    let (load_p, load_q) = network.total_load();
    let mut max_err: f64 = 0.0;
    assert_eq!(result.points.len(), config.count, "no copper-plate discards expected");
    for point in &result.points {
        let op = &ops[point.operating_point_index];
        let (sum_p, sum_q) = op.total();
        let expect = (sum_p - load_p, sum_q - load_q);
        max_err = max_err
            .max((point.s_lambda.0 - expect.0).abs())
            .max((point.s_lambda.1 - expect.1).abs());
    }
    let elapsed = t0.elapsed();
    let ok = max_err < 1e-6 && elapsed.as_secs_f64() < 10.0;
    verdict(
        2,
        "copper-plate Minkowski-sum equivalence",
        ok,
        format!(
            "10,000 points, max |error| {max_err:.2e} kW, {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: FXOR set structure.
// ---------------------------------------------------------------------------

fn case_i_for(count: usize, seed: u64) -> (Vec<ResourceSpec>, ForResult) {
    let network = build_ieee33(StudyCase::I);
    let specs = builtin_fleet(&network);
    let config = SampleConfig {
        count,
        seed,
        ..Default::default()
    };
    let result = compute_for(&network, &specs, &config, SolverSettings::default(), true).unwrap();
    (specs, result)
}

#[test]
fn criterion_3_fxor_structure() {
    let (specs, result) = case_i_for(2000, 42);
    let mut checked = 0usize;
    for dispatch_idx in [0usize, 311, 1207] {
        let op_idx = result.points[dispatch_idx].operating_point_index;
        let request = FxorRequest {
            dispatch: result.points[dispatch_idx].s_lambda,
            dispatch_operating_point: result.retained_ops[op_idx].clone(),
            horizons_s: vec![0.0, 1.0, 6.0, 60.0, 300.0, 1e9],
        };
        let fxor = compute_fxor(&result, &specs, &request).unwrap();
        for w in fxor.memberships.windows(2) {
            let small: BTreeSet<_> = w[0].iter().collect();
            let large: BTreeSet<_> = w[1].iter().collect();
            assert!(small.is_subset(&large), "X_tau nesting violated");
        }
        for members in &fxor.memberships {
            assert!(members.iter().all(|&i| i < result.points.len()), "X_tau ⊄ FOR");
        }
        assert!(
            fxor.memberships[0].contains(&dispatch_idx),
            "dispatch point missing from X_0"
        );
        checked += 1;
    }
    verdict(
        3,
        "FXOR nesting, containment, dispatch ∈ X_0",
        true,
        format!("{checked} dispatch points, 6 horizons each, exact set inclusion"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: all-inverter fleet collapses FXOR into the FOR.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_all_inverter_collapse() {
    let network = build_ieee33(StudyCase::I);
    // drop the rotating machines, keep every inverter resource
    let specs: Vec<ResourceSpec> = builtin_fleet(&network)
        .into_iter()
        .filter(|s| !matches!(s.kind, ResourceKind::DieselGen { .. }))
        .collect();
    let config = SampleConfig {
        count: 2000,
        seed: 42,
        ..Default::default()
    };
    let result = compute_for(&network, &specs, &config, SolverSettings::default(), true).unwrap();
    assert!(!result.points.is_empty());
    let request = FxorRequest {
        dispatch: result.points[0].s_lambda,
        dispatch_operating_point: result.retained_ops[result.points[0].operating_point_index]
            .clone(),
        horizons_s: vec![1.0],
    };
    let fxor = compute_fxor(&result, &specs, &request).unwrap();
    let ok = fxor.memberships[0].len() == result.points.len();
    verdict(
        4,
        "all-inverter fleet: X_1s = FOR",
        ok,
        format!(
            "{} of {} FOR points reachable within 1 s",
            fxor.memberships[0].len(),
            result.points.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: plateau before the fastest activation, then strict growth.
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_activation_plateau() {
    let t0 = Instant::now();
    let (specs, result) = case_i_for(10_000, 42);
    let diesel_lanes: Vec<usize> = specs
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s.kind, ResourceKind::DieselGen { .. }))
        .map(|(i, _)| i)
        .collect();
    // a dispatch whose realizing set-point has every diesel OFF
    let dispatch_idx = result
        .points
        .iter()
        .position(|p| {
            let op = &result.retained_ops[p.operating_point_index];
            diesel_lanes.iter().all(|&l| !op.0[l].on)
        })
        .expect("a sampled all-diesels-OFF point exists");
    let op_idx = result.points[dispatch_idx].operating_point_index;
    let request = FxorRequest {
        dispatch: result.points[dispatch_idx].s_lambda,
        dispatch_operating_point: result.retained_ops[op_idx].clone(),
        horizons_s: vec![1.0, 5.0, 10.0, 14.9, 20.0, 300.0],
    };
    let fxor = compute_fxor(&result, &specs, &request).unwrap();
    let sets: Vec<BTreeSet<usize>> = fxor
        .memberships
        .iter()
        .map(|m| m.iter().copied().collect())
        .collect();
    // constant on [1, 14.9] s: below the 15 s minimum activation nothing new
    let plateau = sets[0] == sets[1] && sets[1] == sets[2] && sets[2] == sets[3];
    // then strictly growing once diesels can come online
    let growth = sets[3].is_subset(&sets[4])
        && sets[4].len() > sets[3].len()
        && sets[4].is_subset(&sets[5])
        && sets[5].len() > sets[4].len();
    let elapsed = t0.elapsed();
    let ok = plateau && growth && elapsed.as_secs_f64() < 60.0;
    verdict(
        5,
        "pre-activation plateau then strict growth",
        ok,
        format!(
            "|X| at (1, 5, 10, 14.9, 20, 300) s = ({}, {}, {}, {}, {}, {}), {:.1} s",
            sets[0].len(),
            sets[1].len(),
            sets[2].len(),
            sets[3].len(),
            sets[4].len(),
            sets[5].len(),
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: case ordering at a shared seed and dispatch.
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_case_ordering() {
    let config = SampleConfig {
        count: 10_000,
        seed: 42,
        ..Default::default()
    };
    let mut runs = Vec::new();
    for case in [StudyCase::I, StudyCase::II, StudyCase::III] {
        let network = build_ieee33(case);
        let specs = builtin_fleet(&network);
        let result =
            compute_for(&network, &specs, &config, SolverSettings::default(), true).unwrap();
        runs.push((specs, result));
    }
    let area_i = runs[0].1.hull().unwrap().area_kw_kvar;
    let area_ii = runs[1].1.hull().unwrap().area_kw_kvar;
    let discards_i = runs[0].1.discarded_count;
    let discards_iii = runs[2].1.discarded_count;

    // shared interior dispatch: Case I hull centroid
    let dispatch = hull_centroid(&runs[0].1.hull().unwrap());
    let mut capacities = Vec::new();
    for (specs, result) in &runs {
        let op_idx = select_dispatch_op(result, dispatch).unwrap();
        let request = FxorRequest {
            dispatch,
            dispatch_operating_point: result.retained_ops[op_idx].clone(),
            horizons_s: FCAS_WINDOWS_S.to_vec(),
        };
        let fxor = compute_fxor(result, specs, &request).unwrap();
        let env = classify_fcas(&fxor, result, dispatch).unwrap();
        let six: Vec<f64> = env
            .windows
            .iter()
            .flat_map(|w| [w.raise_kw, w.lower_kw])
            .collect();
        capacities.push(six);
    }
    let any_le = capacities[2]
        .iter()
        .zip(&capacities[0])
        .any(|(iii, i)| iii <= i);

    let ok = area_ii >= area_i && discards_iii >= discards_i && any_le;
    verdict(
        6,
        "case ordering (areas, discards, FCAS)",
        ok,
        format!(
            "area II {area_ii:.0} ≥ I {area_i:.0}; discards III {discards_iii} ≥ I {discards_i}; \
             FCAS III ≤ I in {} of 6 capacities",
            capacities[2]
                .iter()
                .zip(&capacities[0])
                .filter(|(iii, i)| iii <= i)
                .count()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: byte-identical suite reruns, serial and parallel.
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_suite_determinism() {
    let point_tables = |parallel: bool| -> Vec<(String, Vec<u8>)> {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ScenarioConfig::default();
        config.sampling.count = 800;
        config.sampling.seed = 42;
        config.parallel = parallel;
        config.out_dir = Some(dir.path().to_path_buf());
        run_case_suite(&config).unwrap();
        let mut tables = Vec::new();
        for case in ["case_I", "case_II", "case_III"] {
            for name in ["for_points.csv", "fxor_points.csv", "fxor_cells.csv"] {
                let path = dir.path().join(case).join(name);
                tables.push((format!("{case}/{name}"), std::fs::read(&path).unwrap()));
            }
        }
        tables
    };
    let serial_a = point_tables(false);
    let serial_b = point_tables(false);
    let parallel_a = point_tables(true);
    let parallel_b = point_tables(true);
    let ok = serial_a == serial_b && parallel_a == parallel_b && serial_a == parallel_a;
    verdict(
        7,
        "suite determinism serial/parallel",
        ok,
        format!("{} point tables byte-identical across 4 runs", serial_a.len()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: transition-time unit values.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_transition_times() {
    let network = build_ieee33(StudyCase::I);
    let specs = builtin_fleet(&network);
    let diesel_18 = specs.iter().find(|s| s.id == "diesel-18").unwrap();
    let batt = specs.iter().find(|s| s.id.starts_with("pvb-batt")).unwrap();

    // 40 s activation, then (500−150)/60 kW/s from 150 kW to 300 kW
    let t_start = transition_time(diesel_18, &ResourceState::off(), &ResourceState::at(300.0, 0.0))
        .unwrap();
    // identity transition of a whole fleet set-point (OFF is diesel-only;
    // inverters idle at zero output)
    let op = OperatingPoint(
        specs
            .iter()
            .map(|s| match s.kind {
                ResourceKind::DieselGen { .. } => ResourceState::off(),
                _ => ResourceState::at(0.0, 0.0),
            })
            .collect(),
    );
    let t_ident = fleet_transition_time(&specs, &op, &op).unwrap();
    // battery full active-power swing covers its entire range: the ramp time
    let t_batt = transition_time(batt, &ResourceState::at(-20.0, 0.0), &ResourceState::at(20.0, 0.0))
        .unwrap();

    let ok = (t_start - 65.71).abs() < 0.01 && t_ident == 0.0 && (t_batt - 0.3).abs() < 1e-12;
    verdict(
        8,
        "transition-time unit values",
        ok,
        format!("diesel start {t_start:.4} s, identity {t_ident} s, battery swing {t_batt} s"),
    );
}
