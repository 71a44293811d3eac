//! Flexibility operating regions (FXOR) and FCAS participation
//! envelopes.
//!
//! Given a dispatch point realized by a concrete fleet set-point, every
//! retained FOR operating point gets the fleet transition time from that
//! set-point; the FXOR at horizon τ is the set of FOR points reachable
//! within τ. Only endpoint feasibility is considered — the network state
//! during the transition itself is not re-screened.
//!
//! The FCAS windows follow the Australian contingency services: fast
//! (6 s), slow (60 s) and delayed (5 min), each with raise and lower
//! directions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::feasibility::ForResult;
use crate::fleet::{fleet_transition_time, OperatingPoint, ResourceSpec};
use crate::Result;

/// The three Australian contingency service windows, seconds.
pub const FCAS_WINDOWS_S: [f64; 3] = [6.0, 60.0, 300.0];

/// Inputs for an FXOR evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FxorRequest {
    /// Interface dispatch power (P kW, Q kvar), export-positive.
    pub dispatch: (f64, f64),
    /// The fleet set-points realizing the dispatch.
    pub dispatch_operating_point: OperatingPoint,
    /// Ascending list of horizons τ in seconds.
    pub horizons_s: Vec<f64>,
}

impl FxorRequest {
    pub fn validate(&self) -> Result<()> {
        if self.horizons_s.is_empty() {
            return Err(Error::Request("no horizons given".into()));
        }
        for w in self.horizons_s.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Request(format!(
                    "horizons must ascend strictly, got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        if self.horizons_s[0] < 0.0 {
            return Err(Error::Request("horizons must be nonnegative".into()));
        }
        Ok(())
    }
}

/// FXOR evaluation output, keyed to FOR point indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FxorResult {
    /// Fleet transition time from the dispatch operating point to each
    /// retained FOR point, seconds, parallel to `ForResult::points`.
    pub min_time_s: Vec<f64>,
    /// The evaluated horizons, ascending.
    pub horizons_s: Vec<f64>,
    /// Per horizon, the FOR point indices with `min_time_s ≤ τ`.
    pub memberships: Vec<Vec<usize>>,
    pub dispatch: (f64, f64),
}

impl FxorResult {
    /// Membership set for one horizon, if it was evaluated.
    pub fn members_at(&self, tau_s: f64) -> Option<&[usize]> {
        self.horizons_s
            .iter()
            .position(|&h| (h - tau_s).abs() < 1e-9)
            .map(|i| self.memberships[i].as_slice())
    }
}

/// Selects the retained operating point whose interface power is nearest
/// the requested dispatch (Euclidean PQ distance, ties broken by lowest
/// sample index). Returns its index into the retained set.
pub fn select_dispatch_op(for_result: &ForResult, dispatch: (f64, f64)) -> Result<usize> {
    if for_result.points.is_empty() {
        return Err(Error::Request("the FOR is empty; nothing to dispatch".into()));
    }
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, p) in for_result.points.iter().enumerate() {
        let d = (p.s_lambda.0 - dispatch.0).powi(2) + (p.s_lambda.1 - dispatch.1).powi(2);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(for_result.points[best].operating_point_index)
}

/// Computes the per-point transition times and the horizon membership
/// sets X_τ.
pub fn compute_fxor(
    for_result: &ForResult,
    specs: &[ResourceSpec],
    request: &FxorRequest,
) -> Result<FxorResult> {
    request.validate()?;
    // the dispatch set-point must itself be fleet-valid
    fleet_transition_time(specs, &request.dispatch_operating_point, &request.dispatch_operating_point)?;

    let min_time_s: Vec<f64> = for_result
        .retained_ops
        .par_iter()
        .map(|op| fleet_transition_time(specs, &request.dispatch_operating_point, op))
        .collect::<Result<_>>()?;

    let memberships = request
        .horizons_s
        .iter()
        .map(|&tau| {
            for_result
                .points
                .iter()
                .enumerate()
                .filter(|(_, p)| min_time_s[p.operating_point_index] <= tau)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    Ok(FxorResult {
        min_time_s,
        horizons_s: request.horizons_s.clone(),
        memberships,
        dispatch: request.dispatch,
    })
}

/// Raise/lower capacity and member set for one FCAS window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FcasWindow {
    pub window_s: f64,
    /// Largest achievable ΔP > 0 within the window, kW (0 if none).
    pub raise_kw: f64,
    /// Largest achievable −ΔP for ΔP < 0 within the window, kW (0 if none).
    pub lower_kw: f64,
    pub raise_members: Vec<usize>,
    pub lower_members: Vec<usize>,
}

/// The six contingency capacities: {6 s, 60 s, 300 s} × {raise, lower}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FcasEnvelope {
    pub windows: Vec<FcasWindow>,
}

impl FcasEnvelope {
    pub fn window(&self, tau_s: f64) -> Option<&FcasWindow> {
        self.windows.iter().find(|w| (w.window_s - tau_s).abs() < 1e-9)
    }
}

/// Derives the FCAS envelope from an FXOR result.
///
/// Requires the FXOR to have been computed with horizons including 6, 60
/// and 300 s. ΔP = 0 points (pure reactive deviation) are carried in both
/// member sets.
pub fn classify_fcas(
    fxor: &FxorResult,
    for_result: &ForResult,
    dispatch: (f64, f64),
) -> Result<FcasEnvelope> {
    let mut windows = Vec::new();
    for &tau in &FCAS_WINDOWS_S {
        let members = fxor.members_at(tau).ok_or_else(|| {
            Error::Request(format!("FXOR was not evaluated at the {tau} s FCAS window"))
        })?;
        let mut w = FcasWindow {
            window_s: tau,
            raise_kw: 0.0,
            lower_kw: 0.0,
            raise_members: Vec::new(),
            lower_members: Vec::new(),
        };
        for &i in members {
            let dp = for_result.points[i].s_lambda.0 - dispatch.0;
            if dp >= 0.0 {
                w.raise_kw = w.raise_kw.max(dp);
                w.raise_members.push(i);
            }
            if dp <= 0.0 {
                w.lower_kw = w.lower_kw.max(-dp);
                w.lower_members.push(i);
            }
        }
        windows.push(w);
    }
    Ok(FcasEnvelope { windows })
}

/// Per-PQ-cell minimum transition time over the FOR, for plotting the
/// FXOR as a time map. Cell size in (kW, kvar).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMinimum {
    pub p_cell_kw: f64,
    pub q_cell_kvar: f64,
    pub min_time_s: f64,
    pub point_count: usize,
}

/// Default FXOR time-map cell size.
pub const DEFAULT_CELL_KW: f64 = 10.0;
pub const DEFAULT_CELL_KVAR: f64 = 10.0;

/// Aggregates per-point times onto a regular PQ grid, keeping the minimum
/// time per cell: a point is reachable when any operating point mapping
/// into its cell is reachable.
pub fn cell_minima(
    fxor: &FxorResult,
    for_result: &ForResult,
    cell_kw: f64,
    cell_kvar: f64,
) -> Vec<CellMinimum> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<(i64, i64), (f64, usize)> = BTreeMap::new();
    for p in &for_result.points {
        let t = fxor.min_time_s[p.operating_point_index];
        let key = (
            (p.s_lambda.0 / cell_kw).floor() as i64,
            (p.s_lambda.1 / cell_kvar).floor() as i64,
        );
        let e = cells.entry(key).or_insert((f64::INFINITY, 0));
        e.0 = e.0.min(t);
        e.1 += 1;
    }
    cells
        .into_iter()
        .map(|((ip, iq), (t, n))| CellMinimum {
            p_cell_kw: ip as f64 * cell_kw,
            q_cell_kvar: iq as f64 * cell_kvar,
            min_time_s: t,
            point_count: n,
        })
        .collect()
}
