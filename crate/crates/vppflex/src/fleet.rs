//! DER capability regions, activation and ramp times, and transition
//! times between fleet operating points.
//!
//! Each resource exposes an assumed PQ capability region:
//!
//! - diesel: the rectangle `[p_min, p_max] × [q_min, q_max]`, plus the OFF
//!   state (0, 0); moving out of OFF costs the activation time, which ends
//!   with the unit synchronized at `(p_min, 0)`;
//! - PV: active power between 10% of the rating and the available power,
//!   reactive power limited by the 0.9 power-factor wedge and the inverter
//!   apparent-power circle; zero output when no usable irradiance;
//! - battery: charge/discharge band intersected with the apparent-power
//!   circle;
//! - flexible load: joint constant-power-factor shedding, a fraction of
//!   `(p_shed_max, q_shed_max)`.
//!
//! Ramp figures are full-range traverse times; the ramp rate of a resource
//! is its range divided by that time, independently for P and Q, and a
//! move costs the larger of the two. Inverter-class resources stay
//! synchronized, so only diesel units pay an activation delay.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{BusKind, Network};
use crate::Result;

/// Kind-specific capability and response parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResourceKind {
    DieselGen {
        p_min_kw: f64,
        p_max_kw: f64,
        q_min_kvar: f64,
        q_max_kvar: f64,
        activation_s: f64,
        ramp_full_range_s: f64,
    },
    PvUnit {
        p_rated_kw: f64,
        p_available_kw: f64,
        min_output_fraction: f64,
        pf_limit: f64,
        s_rated_kva: f64,
        activation_s: f64,
        ramp_full_range_s: f64,
    },
    BatteryUnit {
        p_charge_max_kw: f64,
        p_discharge_max_kw: f64,
        s_rated_kva: f64,
        activation_s: f64,
        ramp_full_range_s: f64,
    },
    FlexibleLoad {
        p_shed_max_kw: f64,
        q_shed_max_kvar: f64,
        activation_s: f64,
        ramp_full_range_s: f64,
    },
}

/// One DER of the fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub id: String,
    pub bus: u32,
    #[serde(flatten)]
    pub kind: ResourceKind,
}

/// A resource's output at one instant. `on` is false only for a diesel
/// unit in its OFF state (which forces (0, 0)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceState {
    pub p_kw: f64,
    pub q_kvar: f64,
    pub on: bool,
}

impl ResourceState {
    pub fn off() -> Self {
        ResourceState {
            p_kw: 0.0,
            q_kvar: 0.0,
            on: false,
        }
    }

    pub fn at(p_kw: f64, q_kvar: f64) -> Self {
        ResourceState {
            p_kw,
            q_kvar,
            on: true,
        }
    }
}

/// One sampled fleet set-point: one state per resource, in fleet order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint(pub Vec<ResourceState>);

impl OperatingPoint {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fleet totals (ΣP, ΣQ) in kW/kvar.
    pub fn total(&self) -> (f64, f64) {
        self.0
            .iter()
            .fold((0.0, 0.0), |(p, q), s| (p + s.p_kw, q + s.q_kvar))
    }
}

const GEOM_EPS: f64 = 1e-9;

impl ResourceKind {
    fn validate(&self, id: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::Fleet(format!("resource {id}: {msg}")));
        match *self {
            ResourceKind::DieselGen {
                p_min_kw,
                p_max_kw,
                q_min_kvar,
                q_max_kvar,
                activation_s,
                ramp_full_range_s,
            } => {
                if !(0.0 < p_min_kw && p_min_kw < p_max_kw) {
                    return bad(format!("need 0 < p_min < p_max, got {p_min_kw}..{p_max_kw}"));
                }
                if q_min_kvar >= q_max_kvar {
                    return bad("need q_min < q_max".into());
                }
                if activation_s <= 0.0 || ramp_full_range_s <= 0.0 {
                    return bad("activation and ramp times must be > 0".into());
                }
            }
            ResourceKind::PvUnit {
                p_rated_kw,
                p_available_kw,
                min_output_fraction,
                pf_limit,
                s_rated_kva,
                activation_s,
                ramp_full_range_s,
            } => {
                if p_rated_kw <= 0.0 || s_rated_kva <= 0.0 {
                    return bad("ratings must be > 0".into());
                }
                if p_available_kw < 0.0 || p_available_kw > p_rated_kw + GEOM_EPS {
                    return bad(format!(
                        "available power {p_available_kw} outside [0, {p_rated_kw}]"
                    ));
                }
                if !(0.0..1.0).contains(&min_output_fraction) {
                    return bad("min_output_fraction must be in [0, 1)".into());
                }
                if !(0.0 < pf_limit && pf_limit <= 1.0) {
                    return bad("pf_limit must be in (0, 1]".into());
                }
                check_inverter_times(id, activation_s, ramp_full_range_s)?;
            }
            ResourceKind::BatteryUnit {
                p_charge_max_kw,
                p_discharge_max_kw,
                s_rated_kva,
                activation_s,
                ramp_full_range_s,
            } => {
                if p_charge_max_kw < 0.0 || p_discharge_max_kw < 0.0 || s_rated_kva <= 0.0 {
                    return bad("battery ratings must be nonnegative (s_rated > 0)".into());
                }
                check_inverter_times(id, activation_s, ramp_full_range_s)?;
            }
            ResourceKind::FlexibleLoad {
                p_shed_max_kw,
                q_shed_max_kvar,
                activation_s,
                ramp_full_range_s,
            } => {
                if p_shed_max_kw < 0.0 || q_shed_max_kvar < 0.0 {
                    return bad("shed limits must be nonnegative".into());
                }
                check_inverter_times(id, activation_s, ramp_full_range_s)?;
            }
        }
        Ok(())
    }

    /// Full-range P and Q extents used to derive ramp rates.
    fn ranges(&self) -> (f64, f64) {
        match *self {
            ResourceKind::DieselGen {
                p_min_kw,
                p_max_kw,
                q_min_kvar,
                q_max_kvar,
                ..
            } => (p_max_kw - p_min_kw, q_max_kvar - q_min_kvar),
            ResourceKind::PvUnit {
                p_rated_kw, pf_limit, ..
            } => (p_rated_kw, 2.0 * p_rated_kw * pf_limit.acos().tan()),
            ResourceKind::BatteryUnit {
                p_charge_max_kw,
                p_discharge_max_kw,
                s_rated_kva,
                ..
            } => (p_charge_max_kw + p_discharge_max_kw, 2.0 * s_rated_kva),
            ResourceKind::FlexibleLoad {
                p_shed_max_kw,
                q_shed_max_kvar,
                ..
            } => (p_shed_max_kw, q_shed_max_kvar),
        }
    }

    fn ramp_full_range_s(&self) -> f64 {
        match *self {
            ResourceKind::DieselGen { ramp_full_range_s, .. }
            | ResourceKind::PvUnit { ramp_full_range_s, .. }
            | ResourceKind::BatteryUnit { ramp_full_range_s, .. }
            | ResourceKind::FlexibleLoad { ramp_full_range_s, .. } => ramp_full_range_s,
        }
    }
}

fn check_inverter_times(id: &str, activation_s: f64, ramp_full_range_s: f64) -> Result<()> {
    for (name, v) in [("activation_s", activation_s), ("ramp_full_range_s", ramp_full_range_s)] {
        if !(0.1..=0.3).contains(&v) {
            return Err(Error::Fleet(format!(
                "resource {id}: inverter {name} = {v} outside [0.1, 0.3] s"
            )));
        }
    }
    Ok(())
}

impl ResourceSpec {
    pub fn validate(&self) -> Result<()> {
        self.kind.validate(&self.id)
    }
}

/// Validates a fleet against a network: unique ids, buses exist and are
/// not the slack bus, every spec well formed.
pub fn validate_fleet(specs: &[ResourceSpec], network: &Network) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Fleet("fleet is empty".into()));
    }
    let mut ids = std::collections::HashSet::new();
    for spec in specs {
        if !ids.insert(spec.id.as_str()) {
            return Err(Error::Fleet(format!("duplicate resource id {}", spec.id)));
        }
        spec.validate()?;
        match network.bus(spec.bus) {
            None => {
                return Err(Error::Fleet(format!(
                    "resource {} references unknown bus {}",
                    spec.id, spec.bus
                )))
            }
            Some(b) if b.kind == BusKind::Slack => {
                return Err(Error::Fleet(format!(
                    "resource {} sits on the slack bus {}",
                    spec.id, spec.bus
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// True iff (p, q) lies inside the resource's assumed capability region.
///
/// Diesel: the ON rectangle or exactly (0, 0). PV: the power-factor wedge
/// clipped by the apparent-power circle between the 10% floor and the
/// available power, or zero output. Battery: charge/discharge band inside
/// the apparent-power circle. Flexible load: a shed fraction in [0, 1]
/// applied jointly to both shed limits.
pub fn capability_contains(spec: &ResourceSpec, p_kw: f64, q_kvar: f64) -> bool {
    let eps = GEOM_EPS;
    match spec.kind {
        ResourceKind::DieselGen {
            p_min_kw,
            p_max_kw,
            q_min_kvar,
            q_max_kvar,
            ..
        } => {
            (p_kw == 0.0 && q_kvar == 0.0)
                || (p_kw >= p_min_kw - eps
                    && p_kw <= p_max_kw + eps
                    && q_kvar >= q_min_kvar - eps
                    && q_kvar <= q_max_kvar + eps)
        }
        ResourceKind::PvUnit {
            p_rated_kw,
            p_available_kw,
            min_output_fraction,
            pf_limit,
            s_rated_kva,
            ..
        } => {
            if p_kw == 0.0 && q_kvar == 0.0 {
                return true;
            }
            let floor = min_output_fraction * p_rated_kw;
            let tan_phi = pf_limit.acos().tan();
            p_kw >= floor - eps
                && p_kw <= p_available_kw + eps
                && q_kvar.abs() <= p_kw * tan_phi + eps
                && p_kw * p_kw + q_kvar * q_kvar <= s_rated_kva * s_rated_kva + eps
        }
        ResourceKind::BatteryUnit {
            p_charge_max_kw,
            p_discharge_max_kw,
            s_rated_kva,
            ..
        } => {
            p_kw >= -p_charge_max_kw - eps
                && p_kw <= p_discharge_max_kw + eps
                && p_kw * p_kw + q_kvar * q_kvar <= s_rated_kva * s_rated_kva + eps
        }
        ResourceKind::FlexibleLoad {
            p_shed_max_kw,
            q_shed_max_kvar,
            ..
        } => {
            // joint fraction of (p_shed_max, q_shed_max)
            let fp = if p_shed_max_kw > 0.0 {
                Some(p_kw / p_shed_max_kw)
            } else if p_kw.abs() > eps {
                return false;
            } else {
                None
            };
            let fq = if q_shed_max_kvar > 0.0 {
                Some(q_kvar / q_shed_max_kvar)
            } else if q_kvar.abs() > eps {
                return false;
            } else {
                None
            };
            match (fp, fq) {
                (Some(a), Some(b)) => (a - b).abs() <= 1e-6 && (-eps..=1.0 + eps).contains(&a),
                (Some(a), None) | (None, Some(a)) => (-eps..=1.0 + eps).contains(&a),
                (None, None) => true,
            }
        }
    }
}

fn state_valid(spec: &ResourceSpec, s: &ResourceState) -> bool {
    if !s.on {
        // OFF is a diesel-only state and forces zero output
        return matches!(spec.kind, ResourceKind::DieselGen { .. })
            && s.p_kw == 0.0
            && s.q_kvar == 0.0;
    }
    capability_contains(spec, s.p_kw, s.q_kvar)
}

fn ramp_component(delta: f64, range: f64, ramp_s: f64) -> f64 {
    if delta == 0.0 {
        0.0
    } else if range <= 0.0 {
        f64::INFINITY
    } else {
        delta.abs() / (range / ramp_s)
    }
}

fn ramp_between(kind: &ResourceKind, from: (f64, f64), to: (f64, f64)) -> f64 {
    let (p_range, q_range) = kind.ranges();
    let ramp_s = kind.ramp_full_range_s();
    ramp_component(to.0 - from.0, p_range, ramp_s).max(ramp_component(to.1 - from.1, q_range, ramp_s))
}

/// Time in seconds for one resource to move between two operating states.
///
/// Startup applies only when a diesel unit leaves OFF: the activation delay
/// ends with the unit synchronized at `(p_min, 0)` and further movement
/// runs at the ramp rates. Shutdown ramps down to `(p_min, 0)` before the
/// breaker opens at no extra cost.
pub fn transition_time(spec: &ResourceSpec, from: &ResourceState, to: &ResourceState) -> Result<f64> {
    for (name, s) in [("from", from), ("to", to)] {
        if !state_valid(spec, s) {
            return Err(Error::Fleet(format!(
                "resource {}: {name} point ({}, {}) outside capability",
                spec.id, s.p_kw, s.q_kvar
            )));
        }
    }
    if from == to {
        return Ok(0.0);
    }
    match spec.kind {
        ResourceKind::DieselGen {
            p_min_kw,
            activation_s,
            ..
        } => {
            let sync = (p_min_kw, 0.0);
            let t = match (from.on, to.on) {
                (false, false) => 0.0,
                (false, true) => activation_s + ramp_between(&spec.kind, sync, (to.p_kw, to.q_kvar)),
                (true, false) => ramp_between(&spec.kind, (from.p_kw, from.q_kvar), sync),
                (true, true) => {
                    ramp_between(&spec.kind, (from.p_kw, from.q_kvar), (to.p_kw, to.q_kvar))
                }
            };
            Ok(t)
        }
        _ => Ok(ramp_between(
            &spec.kind,
            (from.p_kw, from.q_kvar),
            (to.p_kw, to.q_kvar),
        )),
    }
}

/// Fleet-level transition time: resources move simultaneously and
/// independently, so the fleet takes the slowest resource's time.
pub fn fleet_transition_time(
    specs: &[ResourceSpec],
    from: &OperatingPoint,
    to: &OperatingPoint,
) -> Result<f64> {
    if from.len() != specs.len() || to.len() != specs.len() {
        return Err(Error::Fleet(format!(
            "operating point length mismatch: fleet has {} resources, points have {} and {}",
            specs.len(),
            from.len(),
            to.len()
        )));
    }
    let mut t: f64 = 0.0;
    for (spec, (f, g)) in specs.iter().zip(from.0.iter().zip(&to.0)) {
        t = t.max(transition_time(spec, f, g)?);
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Built-in fleet of the 33-bus scenario
// ---------------------------------------------------------------------------

/// Inverter response times used by the built-in fleet.
pub const BUILTIN_INVERTER_ACTIVATION_S: f64 = 0.1;
pub const BUILTIN_INVERTER_RAMP_S: f64 = 0.3;

/// Builds the built-in DER fleet for the 33-bus scenario: four diesel
/// units (1 MW total), five aggregated-PV buses (162 kW), five PV+battery
/// buses (5 × 38 kW PV, 5 × 20 kW battery) and, where the network marks
/// load flexible, one constant-power-factor shedding resource per bus.
pub fn builtin_fleet(network: &Network) -> Vec<ResourceSpec> {
    let mut specs = Vec::new();
    let diesel = |id: &str, bus, p_min, p_max, q_min, q_max, act, ramp| ResourceSpec {
        id: id.into(),
        bus,
        kind: ResourceKind::DieselGen {
            p_min_kw: p_min,
            p_max_kw: p_max,
            q_min_kvar: q_min,
            q_max_kvar: q_max,
            activation_s: act,
            ramp_full_range_s: ramp,
        },
    };
    specs.push(diesel("diesel-8", 8, 15.0, 100.0, -40.0, 60.0, 15.0, 20.0));
    specs.push(diesel("diesel-18", 18, 150.0, 500.0, -200.0, 300.0, 40.0, 60.0));
    specs.push(diesel("diesel-25", 25, 60.0, 300.0, -120.0, 180.0, 25.0, 45.0));
    specs.push(diesel("diesel-30", 30, 15.0, 100.0, -40.0, 60.0, 15.0, 20.0));

    let pv = |id: String, bus, rated: f64| ResourceSpec {
        id,
        bus,
        kind: ResourceKind::PvUnit {
            p_rated_kw: rated,
            p_available_kw: rated,
            min_output_fraction: 0.10,
            pf_limit: 0.90,
            s_rated_kva: rated,
            activation_s: BUILTIN_INVERTER_ACTIVATION_S,
            ramp_full_range_s: BUILTIN_INVERTER_RAMP_S,
        },
    };
    // aggregated rooftop PV, 28..38 kW summing to 162 kW
    for (bus, rated) in [(5u32, 28.0), (10, 30.0), (15, 32.0), (20, 34.0), (27, 38.0)] {
        specs.push(pv(format!("pv-{bus}"), bus, rated));
    }
    // PV + battery households, 38 kW PV and 20 kW / 20 kVA storage each
    for bus in [7u32, 14, 22, 24, 31] {
        specs.push(pv(format!("pvb-pv-{bus}"), bus, 38.0));
        specs.push(ResourceSpec {
            id: format!("pvb-batt-{bus}"),
            bus,
            kind: ResourceKind::BatteryUnit {
                p_charge_max_kw: 20.0,
                p_discharge_max_kw: 20.0,
                s_rated_kva: 20.0,
                activation_s: BUILTIN_INVERTER_ACTIVATION_S,
                ramp_full_range_s: BUILTIN_INVERTER_RAMP_S,
            },
        });
    }

    for bus in &network.buses {
        if bus.flexible_fraction > 0.0 && bus.p_load_kw > 0.0 {
            specs.push(ResourceSpec {
                id: format!("flex-{}", bus.id),
                bus: bus.id,
                kind: ResourceKind::FlexibleLoad {
                    p_shed_max_kw: bus.flexible_fraction * bus.p_load_kw,
                    q_shed_max_kvar: bus.flexible_fraction * bus.q_load_kvar.max(0.0),
                    activation_s: BUILTIN_INVERTER_ACTIVATION_S,
                    ramp_full_range_s: BUILTIN_INVERTER_RAMP_S,
                },
            });
        }
    }
    specs
}

// ---------------------------------------------------------------------------
// Resources table (CSV with variant-specific name=value parameters)
// ---------------------------------------------------------------------------

/// Serializes a fleet to the resources table format:
/// `id,kind,bus,name=value,...`.
pub fn to_resources_table(specs: &[ResourceSpec]) -> String {
    let mut out = String::from("id,kind,bus,params\n");
    for s in specs {
        let (kind, params) = match &s.kind {
            ResourceKind::DieselGen {
                p_min_kw,
                p_max_kw,
                q_min_kvar,
                q_max_kvar,
                activation_s,
                ramp_full_range_s,
            } => (
                "diesel_gen",
                format!(
                    "p_min_kw={p_min_kw},p_max_kw={p_max_kw},q_min_kvar={q_min_kvar},q_max_kvar={q_max_kvar},activation_s={activation_s},ramp_full_range_s={ramp_full_range_s}"
                ),
            ),
            ResourceKind::PvUnit {
                p_rated_kw,
                p_available_kw,
                min_output_fraction,
                pf_limit,
                s_rated_kva,
                activation_s,
                ramp_full_range_s,
            } => (
                "pv_unit",
                format!(
                    "p_rated_kw={p_rated_kw},p_available_kw={p_available_kw},min_output_fraction={min_output_fraction},pf_limit={pf_limit},s_rated_kva={s_rated_kva},activation_s={activation_s},ramp_full_range_s={ramp_full_range_s}"
                ),
            ),
            ResourceKind::BatteryUnit {
                p_charge_max_kw,
                p_discharge_max_kw,
                s_rated_kva,
                activation_s,
                ramp_full_range_s,
            } => (
                "battery_unit",
                format!(
                    "p_charge_max_kw={p_charge_max_kw},p_discharge_max_kw={p_discharge_max_kw},s_rated_kva={s_rated_kva},activation_s={activation_s},ramp_full_range_s={ramp_full_range_s}"
                ),
            ),
            ResourceKind::FlexibleLoad {
                p_shed_max_kw,
                q_shed_max_kvar,
                activation_s,
                ramp_full_range_s,
            } => (
                "flexible_load",
                format!(
                    "p_shed_max_kw={p_shed_max_kw},q_shed_max_kvar={q_shed_max_kvar},activation_s={activation_s},ramp_full_range_s={ramp_full_range_s}"
                ),
            ),
        };
        out.push_str(&format!("{},{},{},{}\n", s.id, kind, s.bus, params));
    }
    out
}

/// Parses the resources table format produced by [`to_resources_table`].
pub fn load_resources_table(table: &str) -> Result<Vec<ResourceSpec>> {
    let mut specs = Vec::new();
    for (i, line) in table.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            table: "resources".into(),
            line: i + 1,
            message: msg,
        };
        let fields: Vec<&str> = line.splitn(4, ',').collect();
        if fields.len() < 4 {
            return Err(parse_err("expected id,kind,bus,params".into()));
        }
        let id = fields[0].trim().to_string();
        let kind_name = fields[1].trim();
        let bus: u32 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("invalid bus {:?}", fields[2])))?;
        let mut params = std::collections::HashMap::new();
        for kv in fields[3].split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(format!("malformed parameter {kv:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("invalid value for {k}: {v:?}")))?;
            params.insert(k.trim().to_string(), v);
        }
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| parse_err(format!("missing parameter {k}")))
        };
        let kind = match kind_name {
            "diesel_gen" => ResourceKind::DieselGen {
                p_min_kw: get("p_min_kw")?,
                p_max_kw: get("p_max_kw")?,
                q_min_kvar: get("q_min_kvar")?,
                q_max_kvar: get("q_max_kvar")?,
                activation_s: get("activation_s")?,
                ramp_full_range_s: get("ramp_full_range_s")?,
            },
            "pv_unit" => ResourceKind::PvUnit {
                p_rated_kw: get("p_rated_kw")?,
                p_available_kw: get("p_available_kw")?,
                min_output_fraction: get("min_output_fraction")?,
                pf_limit: get("pf_limit")?,
                s_rated_kva: get("s_rated_kva")?,
                activation_s: get("activation_s")?,
                ramp_full_range_s: get("ramp_full_range_s")?,
            },
            "battery_unit" => ResourceKind::BatteryUnit {
                p_charge_max_kw: get("p_charge_max_kw")?,
                p_discharge_max_kw: get("p_discharge_max_kw")?,
                s_rated_kva: get("s_rated_kva")?,
                activation_s: get("activation_s")?,
                ramp_full_range_s: get("ramp_full_range_s")?,
            },
            "flexible_load" => ResourceKind::FlexibleLoad {
                p_shed_max_kw: get("p_shed_max_kw")?,
                q_shed_max_kvar: get("q_shed_max_kvar")?,
                activation_s: get("activation_s")?,
                ramp_full_range_s: get("ramp_full_range_s")?,
            },
            other => return Err(parse_err(format!("unknown resource kind {other:?}"))),
        };
        let spec = ResourceSpec { id, bus, kind };
        spec.validate()?;
        specs.push(spec);
    }
    Ok(specs)
}
