//! Scenario configuration and end-to-end runs with file artifacts.
//!
//! A scenario is a single TOML document (every field optional, defaults
//! match the built-in Case I study); command-line flags override the file.
//! Runs emit plot-ready data files plus a JSON summary. All values in the
//! data files are physical units (kW / kvar), and re-running with the same
//! config and seed produces byte-identical data files — wall-clock timing
//! lives only in the summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::feasibility::{compute_for, split_ancillary, ForResult};
use crate::fleet::{builtin_fleet, load_resources_table, validate_fleet, ResourceSpec};
use crate::flexibility::{
    cell_minima, classify_fcas, compute_fxor, select_dispatch_op, FcasEnvelope, FxorRequest,
    FxorResult, DEFAULT_CELL_KVAR, DEFAULT_CELL_KW, FCAS_WINDOWS_S,
};
use crate::geometry::{hull_centroid, Hull};
use crate::grid::{build_ieee33, load_network, Network, StudyCase, IEEE33_BASE_KV, IEEE33_BASE_MVA};
use crate::powerflow::SolverSettings;
use crate::sampling::SampleConfig;
use crate::Result;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "VPPFLEX_OUT_DIR";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSource {
    /// Built-in case; ignored when tables are given.
    pub case: Option<String>,
    pub bus_table: Option<PathBuf>,
    pub branch_table: Option<PathBuf>,
    pub base_mva: Option<f64>,
    pub base_kv: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetSource {
    /// Path to a resources table; the built-in fleet when absent.
    pub resources_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSettings {
    /// Overrides the voltage band on every non-slack bus.
    pub voltage_band: Option<(f64, f64)>,
    /// Uniform thermal cap applied to every branch without its own limit.
    pub thermal_cap_kva: Option<f64>,
}

/// A full scenario: network, fleet, sampling, solver, constraints and run
/// outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub network: NetworkSource,
    pub fleet: FleetSource,
    pub sampling: SampleConfig,
    pub solver: SolverSettings,
    pub constraints: ConstraintSettings,
    /// Dispatch point (P kW, Q kvar) for fxor/fcas runs.
    pub dispatch: Option<(f64, f64)>,
    /// Horizons in seconds, strictly ascending.
    pub horizons_s: Vec<f64>,
    pub out_dir: Option<PathBuf>,
    pub parallel: bool,
    /// FXOR time-map cell size (kW, kvar).
    pub cell_size: (f64, f64),
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            network: NetworkSource::default(),
            fleet: FleetSource::default(),
            sampling: SampleConfig::default(),
            solver: SolverSettings::default(),
            constraints: ConstraintSettings::default(),
            dispatch: None,
            horizons_s: vec![1.0, 6.0, 60.0, 300.0],
            out_dir: None,
            parallel: true,
            cell_size: (DEFAULT_CELL_KW, DEFAULT_CELL_KVAR),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::File {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    /// Resolves the output directory: explicit field, then the
    /// environment variable, then `./vppflex-out`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("vppflex-out"))
    }

    /// Builds the network, applying constraint overrides.
    pub fn build_network(&self) -> Result<Network> {
        let mut network = match (&self.network.bus_table, &self.network.branch_table) {
            (Some(bus), Some(branch)) => {
                let read = |p: &Path| {
                    fs::read_to_string(p).map_err(|e| Error::File {
                        path: p.display().to_string(),
                        source: e,
                    })
                };
                load_network(
                    &read(bus)?,
                    &read(branch)?,
                    self.network.base_mva.unwrap_or(IEEE33_BASE_MVA),
                    self.network.base_kv.unwrap_or(IEEE33_BASE_KV),
                )?
            }
            (None, None) => {
                let case: StudyCase = self.network.case.as_deref().unwrap_or("I").parse()?;
                build_ieee33(case)
            }
            _ => {
                return Err(Error::Config(
                    "bus_table and branch_table must be given together".into(),
                ))
            }
        };
        if let Some((lo, hi)) = self.constraints.voltage_band {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::Config(format!("invalid voltage band {lo}..{hi}")));
            }
            for b in &mut network.buses {
                if b.id != network.slack_bus {
                    b.v_min_pu = lo;
                    b.v_max_pu = hi;
                }
            }
        }
        if let Some(cap) = self.constraints.thermal_cap_kva {
            if cap <= 0.0 {
                return Err(Error::Config("thermal cap must be > 0".into()));
            }
            for br in &mut network.branches {
                br.thermal_limit_kva.get_or_insert(cap);
            }
        }
        network.validate()?;
        Ok(network)
    }

    pub fn build_fleet(&self, network: &Network) -> Result<Vec<ResourceSpec>> {
        let specs = match &self.fleet.resources_table {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::File {
                    path: path.display().to_string(),
                    source: e,
                })?;
                load_resources_table(&text)?
            }
            None => builtin_fleet(network),
        };
        validate_fleet(&specs, network)?;
        Ok(specs)
    }
}

// ---------------------------------------------------------------------------
// Artifact writing
// ---------------------------------------------------------------------------

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::File {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path)
}

/// `for_points.csv`: one row per sample, feasible or not.
pub fn for_points_csv(result: &ForResult) -> String {
    let mut out = String::from("sample_index,p_kw,q_kvar,feasible,violation_kind\n");
    for r in &result.records {
        let (p, q) = match r.s_lambda {
            Some((p, q)) => (p.to_string(), q.to_string()),
            None => (String::new(), String::new()),
        };
        let kind = r.violation.map(|k| k.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sample_index,
            p,
            q,
            r.is_feasible(),
            kind
        ));
    }
    out
}

/// `fxor_points.csv`: per feasible FOR point, minimum transition time and
/// per-horizon membership.
pub fn fxor_points_csv(for_result: &ForResult, fxor: &FxorResult) -> String {
    let mut header = String::from("sample_index,p_kw,q_kvar,min_time_s");
    for h in &fxor.horizons_s {
        header.push_str(&format!(",within_{h}s"));
    }
    header.push('\n');
    let mut out = header;
    let member_sets: Vec<std::collections::BTreeSet<usize>> = fxor
        .memberships
        .iter()
        .map(|m| m.iter().copied().collect())
        .collect();
    let feasible_samples: Vec<usize> = for_result
        .records
        .iter()
        .filter(|r| r.is_feasible())
        .map(|r| r.sample_index)
        .collect();
    for (i, p) in for_result.points.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}",
            feasible_samples[i],
            p.s_lambda.0,
            p.s_lambda.1,
            fxor.min_time_s[p.operating_point_index]
        ));
        for set in &member_sets {
            out.push_str(if set.contains(&i) { ",true" } else { ",false" });
        }
        out.push('\n');
    }
    out
}

fn cells_csv(for_result: &ForResult, fxor: &FxorResult, cell: (f64, f64)) -> String {
    let mut out = String::from("p_cell_kw,q_cell_kvar,min_time_s,point_count\n");
    for c in cell_minima(fxor, for_result, cell.0, cell.1) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.p_cell_kw, c.q_cell_kvar, c.min_time_s, c.point_count
        ));
    }
    out
}

#[derive(Debug, Serialize)]
struct HullDoc<'a> {
    /// The hull approximates the FOR boundary from outside; the true
    /// region may be non-convex.
    approximation: &'static str,
    vertex_count: usize,
    area_kw_kvar: f64,
    vertices: &'a [(f64, f64)],
}

fn hull_json(hull: &Hull) -> String {
    serde_json::to_string_pretty(&HullDoc {
        approximation: "convex hull (outer approximation; the true region may be non-convex)",
        vertex_count: hull.vertices.len(),
        area_kw_kvar: hull.area_kw_kvar,
        vertices: &hull.vertices,
    })
    .expect("hull serializes")
    + "\n"
}

/// Summary of one FOR run.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub samples: usize,
    pub feasible: usize,
    pub discarded: usize,
    pub discard_tally: std::collections::BTreeMap<String, usize>,
    pub hull_area_kw_kvar: Option<f64>,
    pub hull_vertex_count: Option<usize>,
    pub sample_config: SampleConfig,
    pub solver: SolverSettings,
    pub elapsed_ms: u128,
    pub dispatch: Option<(f64, f64)>,
    pub dispatch_inside_hull: Option<bool>,
}

/// Artifacts produced by a FOR run.
#[derive(Debug)]
pub struct ForArtifacts {
    pub result: ForResult,
    pub hull: Option<Hull>,
    pub out_dir: PathBuf,
    pub summary: RunSummary,
}

/// Computes the FOR and writes `for_points.csv`, `hull.json` and
/// `summary.json` to the resolved output directory.
pub fn run_for(config: &ScenarioConfig) -> Result<ForArtifacts> {
    run_for_in(config, &config.resolve_out_dir())
}

fn run_for_in(config: &ScenarioConfig, out_dir: &Path) -> Result<ForArtifacts> {
    let started = std::time::Instant::now();
    let network = config.build_network()?;
    let specs = config.build_fleet(&network)?;
    let result = compute_for(&network, &specs, &config.sampling, config.solver, config.parallel)?;
    let hull = if result.points.is_empty() {
        None
    } else {
        Some(result.hull()?)
    };

    write_file(out_dir, "for_points.csv", &for_points_csv(&result))?;
    if let Some(h) = &hull {
        write_file(out_dir, "hull.json", &hull_json(h))?;
    }
    let summary = RunSummary {
        samples: config.sampling.count,
        feasible: result.points.len(),
        discarded: result.discarded_count,
        discard_tally: result
            .discard_tally
            .iter()
            .map(|(k, &v)| (k.to_string(), v))
            .collect(),
        hull_area_kw_kvar: hull.as_ref().map(|h| h.area_kw_kvar),
        hull_vertex_count: hull.as_ref().map(|h| h.vertices.len()),
        sample_config: config.sampling,
        solver: config.solver,
        elapsed_ms: started.elapsed().as_millis(),
        dispatch: None,
        dispatch_inside_hull: None,
    };
    write_file(
        out_dir,
        "summary.json",
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    Ok(ForArtifacts {
        result,
        hull,
        out_dir: out_dir.to_path_buf(),
        summary,
    })
}

/// Artifacts produced by an FXOR/FCAS run.
#[derive(Debug)]
pub struct FxorArtifacts {
    pub for_artifacts: ForArtifacts,
    pub fxor: FxorResult,
    pub fcas: Option<FcasEnvelope>,
    pub dispatch: (f64, f64),
    pub dispatch_inside_hull: bool,
}

#[derive(Debug, Serialize)]
struct FcasSummaryDoc<'a> {
    dispatch_kw_kvar: (f64, f64),
    dispatch_inside_hull: bool,
    capacities: Vec<FcasCapacityRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct FcasCapacityRow {
    service: String,
    window_s: f64,
    direction: &'static str,
    capacity_kw: f64,
}

fn fcas_summary_json(env: &FcasEnvelope, dispatch: (f64, f64), inside: bool) -> String {
    let name = |w: f64| match w as i64 {
        6 => "fast",
        60 => "slow",
        300 => "delayed",
        _ => "custom",
    };
    let mut capacities = Vec::new();
    for w in &env.windows {
        capacities.push(FcasCapacityRow {
            service: format!("{} ({} s)", name(w.window_s), w.window_s),
            window_s: w.window_s,
            direction: "raise",
            capacity_kw: w.raise_kw,
        });
        capacities.push(FcasCapacityRow {
            service: format!("{} ({} s)", name(w.window_s), w.window_s),
            window_s: w.window_s,
            direction: "lower",
            capacity_kw: w.lower_kw,
        });
    }
    let doc = FcasSummaryDoc {
        dispatch_kw_kvar: dispatch,
        dispatch_inside_hull: inside,
        capacities,
        note: (!inside).then_some("dispatch point lies outside the FOR hull"),
    };
    serde_json::to_string_pretty(&doc).expect("fcas summary serializes") + "\n"
}

/// Computes FOR then FXOR and writes the per-point time table, the cell
/// time map and the FCAS summary.
pub fn run_fxor(config: &ScenarioConfig) -> Result<FxorArtifacts> {
    run_fxor_in(config, &config.resolve_out_dir())
}

fn run_fxor_in(config: &ScenarioConfig, out_dir: &Path) -> Result<FxorArtifacts> {
    let dispatch = config
        .dispatch
        .ok_or_else(|| Error::Config("fxor/fcas runs need a dispatch point".into()))?;
    let mut for_artifacts = run_for_in(config, out_dir)?;
    let result = &for_artifacts.result;
    if result.points.is_empty() {
        return Err(Error::Request("the FOR is empty; no flexibility to evaluate".into()));
    }
    let network = config.build_network()?;
    let specs = config.build_fleet(&network)?;

    let op_idx = select_dispatch_op(result, dispatch)?;
    let request = FxorRequest {
        dispatch,
        dispatch_operating_point: result.retained_ops[op_idx].clone(),
        horizons_s: config.horizons_s.clone(),
    };
    let fxor = compute_fxor(result, &specs, &request)?;

    let hull = for_artifacts.hull.as_ref().expect("non-empty FOR has a hull");
    let split = split_ancillary(result, hull, dispatch);
    let inside = split.dispatch_inside_hull;

    write_file(out_dir, "fxor_points.csv", &fxor_points_csv(result, &fxor))?;
    write_file(out_dir, "fxor_cells.csv", &cells_csv(result, &fxor, config.cell_size))?;

    let has_fcas = FCAS_WINDOWS_S
        .iter()
        .all(|&w| fxor.members_at(w).is_some());
    let fcas = if has_fcas {
        let env = classify_fcas(&fxor, result, dispatch)?;
        write_file(
            out_dir,
            "fcas_summary.json",
            &fcas_summary_json(&env, dispatch, inside),
        )?;
        Some(env)
    } else {
        None
    };

    for_artifacts.summary.dispatch = Some(dispatch);
    for_artifacts.summary.dispatch_inside_hull = Some(inside);
    write_file(
        out_dir,
        "summary.json",
        &(serde_json::to_string_pretty(&for_artifacts.summary).expect("summary serializes") + "\n"),
    )?;

    Ok(FxorArtifacts {
        for_artifacts,
        fxor,
        fcas,
        dispatch,
        dispatch_inside_hull: inside,
    })
}

/// Runs an FCAS evaluation: an FXOR run whose horizons are forced to
/// include the three contingency windows.
pub fn run_fcas(config: &ScenarioConfig) -> Result<FxorArtifacts> {
    let mut cfg = config.clone();
    for w in FCAS_WINDOWS_S {
        if !cfg.horizons_s.iter().any(|&h| (h - w).abs() < 1e-9) {
            cfg.horizons_s.push(w);
        }
    }
    cfg.horizons_s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    run_fxor(&cfg)
}

/// Per-case entry of the suite comparison document.
#[derive(Debug, Serialize, Deserialize)]
pub struct CaseComparison {
    pub case: String,
    pub feasible: usize,
    pub discarded: usize,
    pub hull_area_kw_kvar: f64,
    pub fcas_raise_kw: Vec<(f64, f64)>,
    pub fcas_lower_kw: Vec<(f64, f64)>,
}

#[derive(Debug)]
pub struct SuiteArtifacts {
    pub cases: Vec<(StudyCase, FxorArtifacts)>,
    pub comparison: Vec<CaseComparison>,
    pub out_dir: PathBuf,
}

/// Runs Cases I, II and III with a shared seed and a shared dispatch
/// point, writes per-case directories plus `comparison.json`.
///
/// The shared dispatch point defaults to the Case I hull centroid so it is
/// interior to every case's region of interest.
pub fn run_case_suite(config: &ScenarioConfig) -> Result<SuiteArtifacts> {
    let out_dir = config.resolve_out_dir();
    let mut cases = Vec::new();
    let mut comparison = Vec::new();
    let mut shared_dispatch = config.dispatch;

    for case in [StudyCase::I, StudyCase::II, StudyCase::III] {
        let mut cfg = config.clone();
        cfg.network = NetworkSource {
            case: Some(case.to_string()),
            ..Default::default()
        };
        cfg.fleet = FleetSource::default();
        for w in FCAS_WINDOWS_S {
            if !cfg.horizons_s.iter().any(|&h| (h - w).abs() < 1e-9) {
                cfg.horizons_s.push(w);
            }
        }
        cfg.horizons_s.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let case_dir = out_dir.join(format!("case_{case}"));
        if shared_dispatch.is_none() {
            // derive the shared dispatch from the Case I hull centroid
            let probe = run_for_in(&cfg, &case_dir)?;
            let hull = probe
                .hull
                .as_ref()
                .ok_or_else(|| Error::Request("Case I FOR is empty".into()))?;
            shared_dispatch = Some(hull_centroid(hull));
        }
        cfg.dispatch = shared_dispatch;
        let artifacts = run_fxor_in(&cfg, &case_dir)?;

        let env = artifacts
            .fcas
            .as_ref()
            .expect("suite always evaluates the FCAS windows");
        comparison.push(CaseComparison {
            case: case.to_string(),
            feasible: artifacts.for_artifacts.result.points.len(),
            discarded: artifacts.for_artifacts.result.discarded_count,
            hull_area_kw_kvar: artifacts
                .for_artifacts
                .hull
                .as_ref()
                .map(|h| h.area_kw_kvar)
                .unwrap_or(0.0),
            fcas_raise_kw: env.windows.iter().map(|w| (w.window_s, w.raise_kw)).collect(),
            fcas_lower_kw: env.windows.iter().map(|w| (w.window_s, w.lower_kw)).collect(),
        });
        cases.push((case, artifacts));
    }

    write_file(
        &out_dir,
        "comparison.json",
        &(serde_json::to_string_pretty(&comparison).expect("comparison serializes") + "\n"),
    )?;
    Ok(SuiteArtifacts {
        cases,
        comparison,
        out_dir,
    })
}

/// Validation report for `validate` runs.
#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub buses: usize,
    pub branches: usize,
    pub resources: usize,
    pub total_load_kw: f64,
    pub total_load_kvar: f64,
    pub sample_config_ok: bool,
}

/// Loads and validates the scenario without running anything.
pub fn validate_scenario(config: &ScenarioConfig) -> Result<ValidationReport> {
    let network = config.build_network()?;
    let specs = config.build_fleet(&network)?;
    config.sampling.validate()?;
    for w in config.horizons_s.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(format!(
                "horizons must ascend strictly, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    let (p, q) = network.total_load();
    Ok(ValidationReport {
        buses: network.buses.len(),
        branches: network.branches.len(),
        resources: specs.len(),
        total_load_kw: p,
        total_load_kvar: q,
        sample_config_ok: true,
    })
}
