//! Thin command-line front end over the library pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vppflex::runner::{
    run_case_suite, run_fcas, run_for, run_fxor, validate_scenario, ScenarioConfig,
};
use vppflex::sampling::SampleConfig;

#[derive(Parser)]
#[command(name = "vppflex", version, about = "Feasibility and flexibility operating regions of DER aggregations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the feasibility operating region (FOR).
    #[command(name = "for")]
    For(SharedArgs),
    /// Compute the flexibility operating regions (FXOR) for a dispatch point.
    Fxor(SharedArgs),
    /// Evaluate the six FCAS contingency capacities for a dispatch point.
    Fcas(SharedArgs),
    /// Run Cases I, II and III with a shared seed and emit a comparison.
    Suite(SharedArgs),
    /// Load and validate the scenario without running anything.
    Validate(SharedArgs),
}

#[derive(Args)]
struct SharedArgs {
    /// Scenario config file (TOML); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in study case: I, II or III.
    #[arg(long)]
    case: Option<String>,
    /// Number of Monte Carlo samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to $VPPFLEX_OUT_DIR, then ./vppflex-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dispatch point as P,Q in kW,kvar (export-positive).
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    dispatch: Option<(f64, f64)>,
    /// Comma-separated ascending horizons in seconds.
    #[arg(long, value_parser = parse_horizons)]
    horizons: Option<Vec<f64>>,
    /// Voltage band as LO,HI in pu, applied to every non-slack bus.
    #[arg(long, value_parser = parse_pair)]
    voltage_band: Option<(f64, f64)>,
    /// PV irradiance correlation in [0,1].
    #[arg(long)]
    pv_correlation: Option<f64>,
    /// Probability that a diesel unit is ON in a sample.
    #[arg(long)]
    diesel_on_prob: Option<f64>,
    /// Evaluate samples serially instead of in parallel.
    #[arg(long)]
    serial: bool,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated numbers, got {s:?}"))?;
    let a = a.trim().parse().map_err(|_| format!("invalid number {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("invalid number {b:?}"))?;
    Ok((a, b))
}

fn parse_horizons(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("invalid horizon {t:?}")))
        .collect()
}

impl SharedArgs {
    fn into_config(self) -> Result<ScenarioConfig, vppflex::Error> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::from_file(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(case) = self.case {
            cfg.network.case = Some(case);
        }
        let SampleConfig {
            count,
            seed,
            pv_correlation,
            diesel_on_probability,
        } = cfg.sampling;
        cfg.sampling = SampleConfig {
            count: self.samples.unwrap_or(count),
            seed: self.seed.unwrap_or(seed),
            pv_correlation: self.pv_correlation.unwrap_or(pv_correlation),
            diesel_on_probability: self.diesel_on_prob.unwrap_or(diesel_on_probability),
        };
        if let Some(out) = self.out {
            cfg.out_dir = Some(out);
        }
        if let Some(d) = self.dispatch {
            cfg.dispatch = Some(d);
        }
        if let Some(h) = self.horizons {
            cfg.horizons_s = h;
        }
        if let Some(band) = self.voltage_band {
            cfg.constraints.voltage_band = Some(band);
        }
        if self.serial {
            cfg.parallel = false;
        }
        for w in cfg.horizons_s.windows(2) {
            if w[1] <= w[0] {
                return Err(vppflex::Error::Config(format!(
                    "horizons must ascend strictly, got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<(), vppflex::Error> {
    match command {
        Command::For(args) => {
            let artifacts = run_for(&args.into_config()?)?;
            println!(
                "FOR: {} feasible / {} samples, {} discarded; artifacts in {}",
                artifacts.summary.feasible,
                artifacts.summary.samples,
                artifacts.summary.discarded,
                artifacts.out_dir.display()
            );
        }
        Command::Fxor(args) => {
            let artifacts = run_fxor(&args.into_config()?)?;
            println!(
                "FXOR at dispatch ({:.1}, {:.1}) kW/kvar over {} horizons; artifacts in {}",
                artifacts.dispatch.0,
                artifacts.dispatch.1,
                artifacts.fxor.horizons_s.len(),
                artifacts.for_artifacts.out_dir.display()
            );
            if !artifacts.dispatch_inside_hull {
                eprintln!("warning: dispatch point lies outside the FOR hull");
            }
        }
        Command::Fcas(args) => {
            let artifacts = run_fcas(&args.into_config()?)?;
            let env = artifacts.fcas.expect("fcas run evaluates the three windows");
            for w in &env.windows {
                println!(
                    "{:>5} s window: raise {:.1} kW, lower {:.1} kW",
                    w.window_s, w.raise_kw, w.lower_kw
                );
            }
        }
        Command::Suite(args) => {
            let artifacts = run_case_suite(&args.into_config()?)?;
            for c in &artifacts.comparison {
                println!(
                    "Case {:>3}: {} feasible, {} discarded, hull area {:.0} kW·kvar",
                    c.case, c.feasible, c.discarded, c.hull_area_kw_kvar
                );
            }
            println!("artifacts in {}", artifacts.out_dir.display());
        }
        Command::Validate(args) => {
            let report = validate_scenario(&args.into_config()?)?;
            println!(
                "scenario ok: {} buses, {} branches, {} resources, load {:.1} kW / {:.1} kvar",
                report.buses,
                report.branches,
                report.resources,
                report.total_load_kw,
                report.total_load_kvar
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
