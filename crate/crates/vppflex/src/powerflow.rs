//! Full AC power flow (Newton–Raphson, polar form) and constraint
//! screening.
//!
//! One solver covers radial and weakly meshed topologies alike. Every
//! solve starts flat (1.0 pu, 0 rad) and is a pure function of
//! (network, injections), so arbitrarily many solves can run concurrently
//! against a shared network and the results are order-independent.
//!
//! Zero-impedance branches are handled by merging their endpoints into a
//! supernode before the Newton iteration; merged buses share one voltage
//! and the branch itself carries no reportable flow. A network whose
//! closed branches are all zero-impedance therefore reduces to a single
//! node and solves trivially with zero losses.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{BusKind, Network};
use crate::Result;

/// Net complex injection (generation minus load) per non-slack bus, in kW
/// and kvar.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSet {
    by_bus: BTreeMap<u32, (f64, f64)>,
}

impl InjectionSet {
    /// Zero injection at every non-slack bus.
    pub fn zero(network: &Network) -> Self {
        let by_bus = network
            .buses
            .iter()
            .filter(|b| b.kind != BusKind::Slack)
            .map(|b| (b.id, (0.0, 0.0)))
            .collect();
        InjectionSet { by_bus }
    }

    /// The pure-load operating state: `-(p_load, q_load)` at every
    /// non-slack bus.
    pub fn from_loads(network: &Network) -> Self {
        let by_bus = network
            .buses
            .iter()
            .filter(|b| b.kind != BusKind::Slack)
            .map(|b| (b.id, (-b.p_load_kw, -b.q_load_kvar)))
            .collect();
        InjectionSet { by_bus }
    }

    /// Adds (p_kw, q_kvar) onto the bus's current injection.
    pub fn add(&mut self, bus: u32, p_kw: f64, q_kvar: f64) -> Result<()> {
        match self.by_bus.get_mut(&bus) {
            Some(e) => {
                e.0 += p_kw;
                e.1 += q_kvar;
                Ok(())
            }
            None => Err(Error::Network(format!(
                "injection references bus {bus}, which is not a non-slack bus of this network"
            ))),
        }
    }

    pub fn get(&self, bus: u32) -> Option<(f64, f64)> {
        self.by_bus.get(&bus).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, (f64, f64))> + '_ {
        self.by_bus.iter().map(|(&b, &s)| (b, s))
    }
}

/// Solver tolerance and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Power mismatch tolerance in pu.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }
}

/// Result of one AC power-flow solve.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    /// Voltage magnitude per bus, network order, pu.
    pub vm_pu: Vec<f64>,
    /// Voltage angle per bus, network order, rad.
    pub va_rad: Vec<f64>,
    /// Complex flow in kVA entering the branch at the from end and at the
    /// to end, per branch in network order. Zero for open and
    /// zero-impedance branches.
    pub branch_flow_kva: Vec<(Complex64, Complex64)>,
    /// Slack injection (grid into network positive), kW / kvar.
    pub slack_p_kw: f64,
    pub slack_q_kvar: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl PowerFlowSolution {
    /// Total resistive losses over all branches, kW.
    pub fn total_losses_kw(&self) -> f64 {
        self.branch_flow_kva.iter().map(|(f, t)| (f + t).re).sum()
    }

    /// Minimum voltage magnitude over all buses, pu.
    pub fn min_voltage_pu(&self) -> f64 {
        self.vm_pu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Dispatch power at the TSO/DSO interface, export-positive, kW/kvar.
    pub fn dispatch_power(&self) -> (f64, f64) {
        (-self.slack_p_kw, -self.slack_q_kvar)
    }
}

/// One network-limit violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Undervoltage,
    Overvoltage,
    Thermal,
    Nonconvergence,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Undervoltage => "undervoltage",
            ViolationKind::Overvoltage => "overvoltage",
            ViolationKind::Thermal => "thermal",
            ViolationKind::Nonconvergence => "nonconvergence",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Bus id for voltage violations, branch index for thermal, 0 for
    /// nonconvergence.
    pub element: u32,
    pub limit: f64,
    pub actual: f64,
}

/// Empty iff the solution satisfies all constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

// Union-find over bus indices, used to merge zero-impedance branches.
struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as representative
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Solves the nonlinear nodal power-balance equations.
///
/// Nonconvergence (including a singular Jacobian) is reported in the
/// result, never thrown.
pub fn solve_power_flow(
    network: &Network,
    injections: &InjectionSet,
    settings: SolverSettings,
) -> PowerFlowSolution {
    let n = network.buses.len();
    let s_base_kva = network.base_mva * 1000.0;
    let z_base = network.z_base_ohm();

    // merge zero-impedance closed branches into supernodes
    let mut uf = UnionFind::new(n);
    for br in network.branches.iter().filter(|b| b.closed) {
        if br.r_ohm == 0.0 && br.x_ohm == 0.0 {
            let fi = network.bus_index(br.from_bus).unwrap();
            let ti = network.bus_index(br.to_bus).unwrap();
            uf.union(fi, ti);
        }
    }
    let mut group_of = vec![0usize; n];
    let mut groups: Vec<usize> = Vec::new(); // representative bus index per group
    for i in 0..n {
        let r = uf.find(i);
        if let Some(g) = groups.iter().position(|&x| x == r) {
            group_of[i] = g;
        } else {
            group_of[i] = groups.len();
            groups.push(r);
        }
    }
    let ng = groups.len();
    let slack_group = group_of[network.bus_index(network.slack_bus).unwrap()];

    // reduced bus admittance matrix over groups
    let mut ybus = DMatrix::<Complex64>::zeros(ng, ng);
    for br in network.branches.iter().filter(|b| b.closed) {
        if br.r_ohm == 0.0 && br.x_ohm == 0.0 {
            continue;
        }
        let fg = group_of[network.bus_index(br.from_bus).unwrap()];
        let tg = group_of[network.bus_index(br.to_bus).unwrap()];
        if fg == tg {
            continue; // internal to a supernode, carries no flow
        }
        let y = Complex64::new(br.r_ohm / z_base, br.x_ohm / z_base).inv();
        ybus[(fg, fg)] += y;
        ybus[(tg, tg)] += y;
        ybus[(fg, tg)] -= y;
        ybus[(tg, fg)] -= y;
    }

    // specified injection per group, pu
    let mut s_spec = vec![Complex64::new(0.0, 0.0); ng];
    for (bus, (p, q)) in injections.iter() {
        if let Some(i) = network.bus_index(bus) {
            s_spec[group_of[i]] += Complex64::new(p, q) / s_base_kva;
        }
    }

    // unknown groups = all but the slack group
    let pq: Vec<usize> = (0..ng).filter(|&g| g != slack_group).collect();
    let npq = pq.len();

    let mut vm = vec![1.0f64; ng];
    let mut va = vec![0.0f64; ng];
    let mut converged = npq == 0;
    let mut iterations = 0usize;

    let g_re = ybus.map(|c| c.re);
    let g_im = ybus.map(|c| c.im);

    let calc_s = |vm: &[f64], va: &[f64], g: usize| -> Complex64 {
        let vg = Complex64::from_polar(vm[g], va[g]);
        let mut i = Complex64::new(0.0, 0.0);
        for h in 0..vm.len() {
            i += ybus[(g, h)] * Complex64::from_polar(vm[h], va[h]);
        }
        vg * i.conj()
    };

    while !converged && iterations < settings.max_iterations {
        // mismatch f = S_calc - S_spec at the unknown groups
        let mut f = DVector::<f64>::zeros(2 * npq);
        let mut s_calc = vec![Complex64::new(0.0, 0.0); ng];
        for g in 0..ng {
            s_calc[g] = calc_s(&vm, &va, g);
        }
        let mut norm: f64 = 0.0;
        for (k, &g) in pq.iter().enumerate() {
            let m = s_calc[g] - s_spec[g];
            f[k] = m.re;
            f[npq + k] = m.im;
            norm = norm.max(m.re.abs()).max(m.im.abs());
        }
        if norm < settings.tolerance {
            converged = true;
            break;
        }

        // polar Jacobian over the unknown groups
        let mut jac = DMatrix::<f64>::zeros(2 * npq, 2 * npq);
        for (r, &i) in pq.iter().enumerate() {
            let (pi, qi) = (s_calc[i].re, s_calc[i].im);
            for (c, &j) in pq.iter().enumerate() {
                if i == j {
                    jac[(r, c)] = -qi - g_im[(i, i)] * vm[i] * vm[i];
                    jac[(r, npq + c)] = pi / vm[i] + g_re[(i, i)] * vm[i];
                    jac[(npq + r, c)] = pi - g_re[(i, i)] * vm[i] * vm[i];
                    jac[(npq + r, npq + c)] = qi / vm[i] - g_im[(i, i)] * vm[i];
                } else {
                    let d = va[i] - va[j];
                    let (sd, cd) = d.sin_cos();
                    let gij = g_re[(i, j)];
                    let bij = g_im[(i, j)];
                    jac[(r, c)] = vm[i] * vm[j] * (gij * sd - bij * cd);
                    jac[(r, npq + c)] = vm[i] * (gij * cd + bij * sd);
                    jac[(npq + r, c)] = -vm[i] * vm[j] * (gij * cd + bij * sd);
                    jac[(npq + r, npq + c)] = vm[i] * (gij * sd - bij * cd);
                }
            }
        }

        let lu = jac.lu();
        let Some(dx) = lu.solve(&f) else {
            break; // singular Jacobian: report nonconvergence
        };
        if !dx.iter().all(|v| v.is_finite()) {
            break;
        }
        for (k, &g) in pq.iter().enumerate() {
            va[g] -= dx[k];
            vm[g] -= dx[npq + k];
        }
        iterations += 1;
    }

    // final convergence check after the last update
    if !converged && iterations > 0 {
        let ok = pq.iter().all(|&g| {
            let m = calc_s(&vm, &va, g) - s_spec[g];
            m.re.abs() < settings.tolerance && m.im.abs() < settings.tolerance
        });
        converged = ok;
    }

    // expand group voltages to buses
    let vm_pu: Vec<f64> = (0..n).map(|i| vm[group_of[i]]).collect();
    let va_rad: Vec<f64> = (0..n).map(|i| va[group_of[i]]).collect();

    // branch flows in kVA
    let branch_flow_kva: Vec<(Complex64, Complex64)> = network
        .branches
        .iter()
        .map(|br| {
            if !br.closed || (br.r_ohm == 0.0 && br.x_ohm == 0.0) {
                return (Complex64::default(), Complex64::default());
            }
            let fi = network.bus_index(br.from_bus).unwrap();
            let ti = network.bus_index(br.to_bus).unwrap();
            let vf = Complex64::from_polar(vm_pu[fi], va_rad[fi]);
            let vt = Complex64::from_polar(vm_pu[ti], va_rad[ti]);
            let y = Complex64::new(br.r_ohm / z_base, br.x_ohm / z_base).inv();
            let s_from = vf * ((vf - vt) * y).conj() * s_base_kva;
            let s_to = vt * ((vt - vf) * y).conj() * s_base_kva;
            (s_from, s_to)
        })
        .collect();

    // slack injection: the slack group's computed power minus the specified
    // injections of any non-slack buses merged into it
    let s_group = calc_s(&vm, &va, slack_group) * s_base_kva;
    let merged_spec: Complex64 = injections
        .iter()
        .filter(|(bus, _)| {
            network
                .bus_index(*bus)
                .map(|i| group_of[i] == slack_group)
                .unwrap_or(false)
        })
        .map(|(_, (p, q))| Complex64::new(p, q))
        .sum();
    let s_slack = s_group - merged_spec;

    PowerFlowSolution {
        vm_pu,
        va_rad,
        branch_flow_kva,
        slack_p_kw: s_slack.re,
        slack_q_kvar: s_slack.im,
        converged,
        iterations,
    }
}

/// Screens a solution against bus voltage and branch thermal limits.
///
/// A nonconverged solution yields exactly one `nonconvergence` violation.
pub fn check_constraints(network: &Network, solution: &PowerFlowSolution) -> Result<ViolationReport> {
    if solution.vm_pu.len() != network.buses.len()
        || solution.branch_flow_kva.len() != network.branches.len()
    {
        return Err(Error::Network(
            "solution dimensions do not match the network".into(),
        ));
    }
    let mut report = ViolationReport::default();
    if !solution.converged {
        report.violations.push(Violation {
            kind: ViolationKind::Nonconvergence,
            element: 0,
            limit: 0.0,
            actual: 0.0,
        });
        return Ok(report);
    }
    for (bus, &v) in network.buses.iter().zip(&solution.vm_pu) {
        if v < bus.v_min_pu {
            report.violations.push(Violation {
                kind: ViolationKind::Undervoltage,
                element: bus.id,
                limit: bus.v_min_pu,
                actual: v,
            });
        } else if v > bus.v_max_pu {
            report.violations.push(Violation {
                kind: ViolationKind::Overvoltage,
                element: bus.id,
                limit: bus.v_max_pu,
                actual: v,
            });
        }
    }
    for (i, (br, (sf, st))) in network
        .branches
        .iter()
        .zip(&solution.branch_flow_kva)
        .enumerate()
    {
        if let Some(limit) = br.thermal_limit_kva {
            let flow = sf.norm().max(st.norm());
            if flow > limit {
                report.violations.push(Violation {
                    kind: ViolationKind::Thermal,
                    element: i as u32,
                    limit,
                    actual: flow,
                });
            }
        }
    }
    Ok(report)
}
