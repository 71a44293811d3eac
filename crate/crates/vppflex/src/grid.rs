//! Distribution network model: buses, branches, tie switches, CSV tables
//! and the built-in modified 33-bus test feeder.
//!
//! Networks are immutable after construction; topology edits
//! ([`apply_switch_state`]) return new values, so a validated [`Network`]
//! can be shared read-only across any number of workers.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Role of a bus in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    /// The transmission grid connection; balances the network and defines
    /// the TSO/DSO interface exchange.
    Slack,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    pub p_load_kw: f64,
    pub q_load_kvar: f64,
    pub v_min_pu: f64,
    pub v_max_pu: f64,
    /// Share of this bus's load that can be shed by the aggregation
    /// (0 unless the scenario enables flexible demand).
    pub flexible_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: u32,
    pub to_bus: u32,
    pub r_ohm: f64,
    pub x_ohm: f64,
    /// `None` = unlimited.
    pub thermal_limit_kva: Option<f64>,
    pub is_switch: bool,
    pub closed: bool,
}

/// A validated distribution network. The closed-branch subgraph is
/// guaranteed connected and spanning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub base_mva: f64,
    pub base_kv: f64,
    pub slack_bus: u32,
}

/// The three built-in study cases of the 33-bus scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyCase {
    /// Base system: ties closed, no flexible demand.
    I,
    /// Ties closed, 5% of the load at each bus flexible.
    II,
    /// Tie switches 8–21 and 12–22 open, no flexible demand.
    III,
}

impl fmt::Display for StudyCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StudyCase::I => write!(f, "I"),
            StudyCase::II => write!(f, "II"),
            StudyCase::III => write!(f, "III"),
        }
    }
}

impl std::str::FromStr for StudyCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "1" => Ok(StudyCase::I),
            "II" | "ii" | "2" => Ok(StudyCase::II),
            "III" | "iii" | "3" => Ok(StudyCase::III),
            other => Err(Error::Config(format!("unknown case {other:?} (expected I, II or III)"))),
        }
    }
}

impl Network {
    pub fn bus(&self, id: u32) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn total_load(&self) -> (f64, f64) {
        self.buses
            .iter()
            .fold((0.0, 0.0), |(p, q), b| (p + b.p_load_kw, q + b.q_load_kvar))
    }

    /// Impedance base in ohms, `base_kv² / base_mva`.
    pub fn z_base_ohm(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    /// Checks all structural invariants, naming the offending element.
    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::Network("network has no buses".into()));
        }
        let mut ids = HashSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(Error::Network(format!("duplicate bus id {}", b.id)));
            }
            if !(b.v_min_pu > 0.0 && b.v_min_pu < b.v_max_pu) {
                return Err(Error::Network(format!(
                    "bus {}: voltage limits must satisfy 0 < v_min < v_max (got {}..{})",
                    b.id, b.v_min_pu, b.v_max_pu
                )));
            }
            if b.p_load_kw < 0.0 {
                return Err(Error::Network(format!("bus {}: negative active load", b.id)));
            }
            if !(0.0..=1.0).contains(&b.flexible_fraction) {
                return Err(Error::Network(format!(
                    "bus {}: flexible_fraction {} outside [0,1]",
                    b.id, b.flexible_fraction
                )));
            }
        }
        let slacks: Vec<u32> = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .map(|b| b.id)
            .collect();
        match slacks.as_slice() {
            [one] if *one == self.slack_bus => {}
            [] => return Err(Error::Network("no slack bus".into())),
            [one] => {
                return Err(Error::Network(format!(
                    "slack_bus field is {} but bus {} has kind slack",
                    self.slack_bus, one
                )))
            }
            many => {
                return Err(Error::Network(format!("multiple slack buses: {many:?}")));
            }
        }
        if !(self.base_mva > 0.0 && self.base_kv > 0.0) {
            return Err(Error::Network("per-unit bases must be positive".into()));
        }
        for (i, br) in self.branches.iter().enumerate() {
            if br.from_bus == br.to_bus {
                return Err(Error::Network(format!("branch {i}: from == to ({})", br.from_bus)));
            }
            for end in [br.from_bus, br.to_bus] {
                if !ids.contains(&end) {
                    return Err(Error::Network(format!(
                        "branch {i} ({}-{}): references unknown bus {end}",
                        br.from_bus, br.to_bus
                    )));
                }
            }
            if br.r_ohm < 0.0 {
                return Err(Error::Network(format!("branch {i}: negative resistance")));
            }
            if let Some(lim) = br.thermal_limit_kva {
                if lim <= 0.0 {
                    return Err(Error::Network(format!("branch {i}: thermal limit must be > 0")));
                }
            }
            if !br.is_switch && !br.closed {
                return Err(Error::Network(format!(
                    "branch {i} ({}-{}): non-switch branches must be closed",
                    br.from_bus, br.to_bus
                )));
            }
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let mut adj: HashMap<u32, Vec<u32>> = HashMap::new();
        for br in self.branches.iter().filter(|b| b.closed) {
            adj.entry(br.from_bus).or_default().push(br.to_bus);
            adj.entry(br.to_bus).or_default().push(br.from_bus);
        }
        let mut seen = HashSet::new();
        let mut stack = vec![self.slack_bus];
        while let Some(b) = stack.pop() {
            if seen.insert(b) {
                if let Some(ns) = adj.get(&b) {
                    stack.extend(ns.iter().copied());
                }
            }
        }
        for b in &self.buses {
            if !seen.contains(&b.id) {
                return Err(Error::Network(format!(
                    "closed-branch subgraph is disconnected: bus {} unreachable from slack",
                    b.id
                )));
            }
        }
        Ok(())
    }

    /// Serializes to the bus-table CSV format.
    pub fn to_bus_table(&self) -> String {
        let mut out = String::from("id,kind,p_load_kw,q_load_kvar,v_min_pu,v_max_pu,flexible_fraction\n");
        for b in &self.buses {
            let kind = match b.kind {
                BusKind::Slack => "slack",
                BusKind::Load => "load",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.id, kind, b.p_load_kw, b.q_load_kvar, b.v_min_pu, b.v_max_pu, b.flexible_fraction
            ));
        }
        out
    }

    /// Serializes to the branch-table CSV format (empty thermal limit =
    /// unlimited).
    pub fn to_branch_table(&self) -> String {
        let mut out = String::from("from,to,r_ohm,x_ohm,thermal_limit_kva,is_switch,closed\n");
        for br in &self.branches {
            let lim = br.thermal_limit_kva.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                br.from_bus, br.to_bus, br.r_ohm, br.x_ohm, lim, br.is_switch, br.closed
            ));
        }
        out
    }
}

fn parse_field<T: std::str::FromStr>(table: &str, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        table: table.into(),
        line,
        message: format!("invalid {name}: {raw:?}"),
    })
}

/// Parses and validates a network from the two CSV tables.
///
/// Base quantities come from the caller (the scenario config); the built-in
/// feeder uses 12.66 kV / 100 MVA.
pub fn load_network(bus_table: &str, branch_table: &str, base_mva: f64, base_kv: f64) -> Result<Network> {
    let mut buses = Vec::new();
    let mut slack = None;
    for (i, line) in bus_table.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Parse {
                table: "bus".into(),
                line: i + 1,
                message: format!("expected 7 fields, got {}", f.len()),
            });
        }
        let kind = match f[1].trim() {
            "slack" => BusKind::Slack,
            "load" => BusKind::Load,
            other => {
                return Err(Error::Parse {
                    table: "bus".into(),
                    line: i + 1,
                    message: format!("unknown bus kind {other:?}"),
                })
            }
        };
        let bus = Bus {
            id: parse_field("bus", i + 1, "id", f[0])?,
            kind,
            p_load_kw: parse_field("bus", i + 1, "p_load_kw", f[2])?,
            q_load_kvar: parse_field("bus", i + 1, "q_load_kvar", f[3])?,
            v_min_pu: parse_field("bus", i + 1, "v_min_pu", f[4])?,
            v_max_pu: parse_field("bus", i + 1, "v_max_pu", f[5])?,
            flexible_fraction: parse_field("bus", i + 1, "flexible_fraction", f[6])?,
        };
        if kind == BusKind::Slack {
            slack = Some(bus.id);
        }
        buses.push(bus);
    }
    let slack_bus = slack.ok_or_else(|| Error::Network("bus table has no slack bus".into()))?;

    let mut branches = Vec::new();
    for (i, line) in branch_table.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Parse {
                table: "branch".into(),
                line: i + 1,
                message: format!("expected 7 fields, got {}", f.len()),
            });
        }
        let lim = if f[4].trim().is_empty() {
            None
        } else {
            Some(parse_field("branch", i + 1, "thermal_limit_kva", f[4])?)
        };
        branches.push(Branch {
            from_bus: parse_field("branch", i + 1, "from", f[0])?,
            to_bus: parse_field("branch", i + 1, "to", f[1])?,
            r_ohm: parse_field("branch", i + 1, "r_ohm", f[2])?,
            x_ohm: parse_field("branch", i + 1, "x_ohm", f[3])?,
            thermal_limit_kva: lim,
            is_switch: parse_field("branch", i + 1, "is_switch", f[5])?,
            closed: parse_field("branch", i + 1, "closed", f[6])?,
        });
    }

    let network = Network {
        buses,
        branches,
        base_mva,
        base_kv,
        slack_bus,
    };
    network.validate()?;
    Ok(network)
}

/// Returns a copy of the network with the named tie switch opened or
/// closed. Re-validates connectivity.
pub fn apply_switch_state(network: &Network, branch: (u32, u32), closed: bool) -> Result<Network> {
    let mut out = network.clone();
    let found = out.branches.iter_mut().find(|b| {
        (b.from_bus, b.to_bus) == branch || (b.to_bus, b.from_bus) == branch
    });
    match found {
        None => Err(Error::Network(format!(
            "no branch between buses {} and {}",
            branch.0, branch.1
        ))),
        Some(b) if !b.is_switch => Err(Error::Network(format!(
            "branch {}-{} is not a switch",
            branch.0, branch.1
        ))),
        Some(b) => {
            b.closed = closed;
            out.validate()?;
            Ok(out)
        }
    }
}

// Baran & Wu 12.66 kV feeder line data: (from, to, r_ohm, x_ohm).
const IEEE33_LINES: [(u32, u32, f64, f64); 32] = [
    (1, 2, 0.0922, 0.0470),
    (2, 3, 0.4930, 0.2511),
    (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941),
    (5, 6, 0.8190, 0.7070),
    (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351),
    (8, 9, 1.0300, 0.7400),
    (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650),
    (11, 12, 0.3744, 0.1238),
    (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129),
    (14, 15, 0.5910, 0.5260),
    (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210),
    (17, 18, 0.7320, 0.5740),
    (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554),
    (20, 21, 0.4095, 0.4784),
    (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083),
    (23, 24, 0.8980, 0.7091),
    (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034),
    (26, 27, 0.2842, 0.1447),
    (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006),
    (29, 30, 0.5075, 0.2585),
    (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619),
    (32, 33, 0.3410, 0.5302),
];

// Tie switches retained from the original feeder; the other tie lines are
// not part of this scenario.
const IEEE33_TIES: [(u32, u32, f64, f64); 2] = [
    (8, 21, 2.0, 2.0),
    (12, 22, 2.0, 2.0),
];

// Baran & Wu nominal loads per bus (P kW, Q kvar), buses 2..=33.
const IEEE33_LOADS: [(u32, f64, f64); 32] = [
    (2, 100.0, 60.0),
    (3, 90.0, 40.0),
    (4, 120.0, 80.0),
    (5, 60.0, 30.0),
    (6, 60.0, 20.0),
    (7, 200.0, 100.0),
    (8, 200.0, 100.0),
    (9, 60.0, 20.0),
    (10, 60.0, 20.0),
    (11, 45.0, 30.0),
    (12, 60.0, 35.0),
    (13, 60.0, 35.0),
    (14, 120.0, 80.0),
    (15, 60.0, 10.0),
    (16, 60.0, 20.0),
    (17, 60.0, 20.0),
    (18, 90.0, 40.0),
    (19, 90.0, 40.0),
    (20, 90.0, 40.0),
    (21, 90.0, 40.0),
    (22, 90.0, 40.0),
    (23, 90.0, 50.0),
    (24, 420.0, 200.0),
    (25, 420.0, 200.0),
    (26, 60.0, 25.0),
    (27, 60.0, 25.0),
    (28, 60.0, 20.0),
    (29, 120.0, 70.0),
    (30, 200.0, 600.0),
    (31, 150.0, 70.0),
    (32, 210.0, 100.0),
    (33, 60.0, 40.0),
];

/// Target system totals of the modified scenario.
pub const IEEE33_TOTAL_P_KW: f64 = 3710.0;
pub const IEEE33_TOTAL_Q_KVAR: f64 = 1760.0;

/// Per-unit bases of the built-in feeder.
pub const IEEE33_BASE_KV: f64 = 12.66;
pub const IEEE33_BASE_MVA: f64 = 100.0;

/// Default voltage band on non-slack buses. The loaded feeder's nominal
/// minimum voltage is about 0.94 pu, so a conventional ±5% band would leave
/// no feasible operation at all; 0.925 pu keeps the meshed configurations
/// fully operable while the radial Case III topology (nominal minimum about
/// 0.92 pu) sheds its deepest import excursions.
pub const DEFAULT_V_MIN_PU: f64 = 0.925;
pub const DEFAULT_V_MAX_PU: f64 = 1.05;

/// Builds the modified 33-bus scenario for the given study case.
///
/// 33 buses, 32 radial branches plus the two tie switches 8–21 and 12–22.
/// Bus loads are the Baran & Wu values scaled uniformly so the system
/// totals are exactly 3.71 MW and 1.76 MVAr. Case II marks 5% of every
/// load bus flexible; Case III opens both ties.
pub fn build_ieee33(case: StudyCase) -> Network {
    let nominal_p: f64 = IEEE33_LOADS.iter().map(|l| l.1).sum();
    let nominal_q: f64 = IEEE33_LOADS.iter().map(|l| l.2).sum();
    let p_scale = IEEE33_TOTAL_P_KW / nominal_p;
    let q_scale = IEEE33_TOTAL_Q_KVAR / nominal_q;
    let flexible = match case {
        StudyCase::II => 0.05,
        _ => 0.0,
    };
    let ties_closed = !matches!(case, StudyCase::III);

    let mut buses = vec![Bus {
        id: 1,
        kind: BusKind::Slack,
        p_load_kw: 0.0,
        q_load_kvar: 0.0,
        v_min_pu: DEFAULT_V_MIN_PU,
        v_max_pu: DEFAULT_V_MAX_PU,
        flexible_fraction: 0.0,
    }];
    for &(id, p, q) in &IEEE33_LOADS {
        buses.push(Bus {
            id,
            kind: BusKind::Load,
            p_load_kw: p * p_scale,
            q_load_kvar: q * q_scale,
            v_min_pu: DEFAULT_V_MIN_PU,
            v_max_pu: DEFAULT_V_MAX_PU,
            flexible_fraction: flexible,
        });
    }

    let mut branches: Vec<Branch> = IEEE33_LINES
        .iter()
        .map(|&(f, t, r, x)| Branch {
            from_bus: f,
            to_bus: t,
            r_ohm: r,
            x_ohm: x,
            thermal_limit_kva: None,
            is_switch: false,
            closed: true,
        })
        .collect();
    for &(f, t, r, x) in &IEEE33_TIES {
        branches.push(Branch {
            from_bus: f,
            to_bus: t,
            r_ohm: r,
            x_ohm: x,
            thermal_limit_kva: None,
            is_switch: true,
            closed: ties_closed,
        });
    }

    let network = Network {
        buses,
        branches,
        base_mva: IEEE33_BASE_MVA,
        base_kv: IEEE33_BASE_KV,
        slack_bus: 1,
    };
    debug_assert!(network.validate().is_ok());
    network
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_tables_reproduce_case_i() {
        let loaded = load_network(
            include_str!("../data/ieee33_bus.csv"),
            include_str!("../data/ieee33_branch.csv"),
            100.0,
            12.66,
        )
        .unwrap();
        assert_eq!(loaded, build_ieee33(StudyCase::I));
    }

    #[test]
    fn case_i_totals_and_ties() {
        let n = build_ieee33(StudyCase::I);
        assert_eq!(n.buses.len(), 33);
        assert_eq!(n.branches.len(), 34);
        let (p, q) = n.total_load();
        assert!((p - 3710.0).abs() < 1e-6, "total P = {p}");
        assert!((q - 1760.0).abs() < 1e-6, "total Q = {q}");
        assert!(n.branches.iter().filter(|b| b.is_switch).all(|b| b.closed));
        n.validate().unwrap();
    }

    #[test]
    fn case_ii_flexible_fractions() {
        let n = build_ieee33(StudyCase::II);
        for b in n.buses.iter().filter(|b| b.kind == BusKind::Load) {
            assert_eq!(b.flexible_fraction, 0.05, "bus {}", b.id);
        }
    }

    #[test]
    fn case_iii_ties_open() {
        let n = build_ieee33(StudyCase::III);
        for &(f, t) in &[(8, 21), (12, 22)] {
            let br = n
                .branches
                .iter()
                .find(|b| (b.from_bus, b.to_bus) == (f, t))
                .unwrap();
            assert!(br.is_switch);
            assert!(!br.closed);
        }
        n.validate().unwrap();
    }

    #[test]
    fn case_i_and_iii_differ_only_in_tie_flags() {
        let a = build_ieee33(StudyCase::I);
        let b = build_ieee33(StudyCase::III);
        assert_eq!(a.buses, b.buses);
        for (x, y) in a.branches.iter().zip(&b.branches) {
            if x.is_switch {
                assert!(x.closed && !y.closed);
                let mut y2 = y.clone();
                y2.closed = true;
                assert_eq!(*x, y2);
            } else {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn switch_toggling() {
        let iii = build_ieee33(StudyCase::III);
        let closed = apply_switch_state(&iii, (8, 21), true).unwrap();
        let br = closed
            .branches
            .iter()
            .find(|b| (b.from_bus, b.to_bus) == (8, 21))
            .unwrap();
        assert!(br.closed);

        let i = build_ieee33(StudyCase::I);
        let step = apply_switch_state(&i, (8, 21), false).unwrap();
        let both = apply_switch_state(&step, (12, 22), false).unwrap();
        assert_eq!(both, iii);
    }

    #[test]
    fn switch_errors() {
        let i = build_ieee33(StudyCase::I);
        assert!(apply_switch_state(&i, (1, 99), false).is_err());
        // a plain line is not a switch
        assert!(apply_switch_state(&i, (1, 2), false).is_err());
    }

    #[test]
    fn opening_a_radial_branch_would_disconnect() {
        // make branch 32-33 a switch, then opening it must fail the spanning check
        let mut n = build_ieee33(StudyCase::III);
        n.branches.iter_mut().find(|b| b.to_bus == 33).unwrap().is_switch = true;
        let err = apply_switch_state(&n, (32, 33), false).unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
    }

    #[test]
    fn minimal_two_bus_network_loads() {
        let bus = "id,kind,p_load_kw,q_load_kvar,v_min_pu,v_max_pu,flexible_fraction\n\
                   1,slack,0,0,0.95,1.05,0\n\
                   2,load,100,0,0.95,1.05,0\n";
        let branch = "from,to,r_ohm,x_ohm,thermal_limit_kva,is_switch,closed\n\
                      1,2,0.1,0.1,,false,true\n";
        let n = load_network(bus, branch, 100.0, 12.66).unwrap();
        assert_eq!(n.buses.len(), 2);
        n.validate().unwrap();
    }

    #[test]
    fn dangling_branch_reference_names_bus() {
        let n = build_ieee33(StudyCase::I);
        let mut branch_table = n.to_branch_table();
        branch_table.push_str("5,99,0.1,0.1,,false,true\n");
        let err = load_network(&n.to_bus_table(), &branch_table, 100.0, 12.66).unwrap_err();
        assert!(err.to_string().contains("99"), "{err}");
    }

    #[test]
    fn round_trip_reproduces_network() {
        for case in [StudyCase::I, StudyCase::II, StudyCase::III] {
            let n = build_ieee33(case);
            let back = load_network(&n.to_bus_table(), &n.to_branch_table(), n.base_mva, n.base_kv)
                .unwrap();
            assert_eq!(n, back);
        }
    }
}
