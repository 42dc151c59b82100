//! Command-line interface: `localize`, `simulate`, and `evaluate`.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 when a run completed but
//! produced no output (no estimates, or no overlap with truth).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use driftloc::config;
use driftloc::ingest;
use driftloc::output;
use driftloc::pipeline::{self, DeploymentLogs, Mode, PipelineError};
use driftloc::sim;

#[derive(Parser)]
#[command(
    name = "driftloc",
    about = "Acoustic time-of-flight localization of drifting underwater floats",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct target trajectories from ping, GPS, and depth logs.
    Localize {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Run configuration TOML.
        #[arg(long)]
        config: PathBuf,
        /// Directory of per-device ping log CSVs.
        #[arg(long)]
        pings: PathBuf,
        /// Directory holding GPS and dive/rise CSVs.
        #[arg(long)]
        gps: PathBuf,
        /// Directory of depth log CSVs.
        #[arg(long)]
        depth: PathBuf,
        /// Output directory (estimates.csv, trajectories.geojson, report.txt).
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic deployment with ground truth.
    Simulate {
        /// Scenario TOML.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (pings/, gps/, depth/, truth.csv).
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an estimates CSV against a ground-truth CSV.
    Evaluate {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Tof,
    Tdoa,
    EvalSlb,
}

impl From<ModeArg> for Mode {
    fn from(mode: ModeArg) -> Mode {
        match mode {
            ModeArg::Tof => Mode::Tof,
            ModeArg::Tdoa => Mode::Tdoa,
            ModeArg::EvalSlb => Mode::EvalSlb,
        }
    }
}

enum RunFailure {
    /// Bad inputs: exit 1.
    Input(anyhow::Error),
    /// Ran cleanly but produced nothing: exit 2.
    NoOutput(String),
}

impl From<anyhow::Error> for RunFailure {
    fn from(e: anyhow::Error) -> Self {
        RunFailure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Localize {
            mode,
            config,
            pings,
            gps,
            depth,
            out,
        } => localize(mode.into(), &config, &pings, &gps, &depth, &out),
        Command::Simulate { scenario, out } => simulate(&scenario, &out),
        Command::Evaluate { estimates, truth } => evaluate(&estimates, &truth),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunFailure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(RunFailure::NoOutput(why)) => {
            eprintln!("no output produced: {why}");
            ExitCode::from(2)
        }
    }
}

fn localize(
    mode: Mode,
    config_path: &Path,
    pings_dir: &Path,
    gps_dir: &Path,
    depth_dir: &Path,
    out_dir: &Path,
) -> Result<(), RunFailure> {
    let cfg = config::load_run_config(config_path, mode).context("loading run config")?;

    let pings = ingest::load_ping_dir(pings_dir).context("loading ping logs")?;
    for warning in &pings.warnings {
        eprintln!("warning: {warning}");
    }
    let gps = ingest::load_gps_dir(gps_dir).context("loading GPS logs")?;
    let depth = ingest::load_depth_dir(depth_dir).context("loading depth logs")?;
    let logs = DeploymentLogs {
        pings: pings.records,
        gps: gps.tracks,
        depth,
        dive_rise: gps.dive_rise,
    };

    let run = match pipeline::run(&logs, &cfg) {
        Ok(run) => run,
        Err(PipelineError::NoTargets) => {
            return Err(RunFailure::NoOutput(
                "no localization targets resolved for this mode".into(),
            ))
        }
        Err(e) => return Err(RunFailure::Input(anyhow::Error::new(e))),
    };

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mode_name = match mode {
        Mode::Tof => "tof",
        Mode::Tdoa => "tdoa",
        Mode::EvalSlb => "eval-slb",
    };
    let report = output::render_report(mode_name, &run.diagnostics, run.error_stats.as_ref());
    fs::write(out_dir.join("report.txt"), &report).context("writing report")?;
    fs::write(
        out_dir.join("estimates.csv"),
        output::write_estimates_csv(&run.estimates),
    )
    .context("writing estimates")?;
    let geojson = output::trajectories_geojson(&run.estimates);
    fs::write(
        out_dir.join("trajectories.geojson"),
        serde_json::to_string_pretty(&geojson).expect("serializable"),
    )
    .context("writing GeoJSON")?;
    print!("{report}");

    if run.estimates.is_empty() {
        return Err(RunFailure::NoOutput("run produced no estimates".into()));
    }
    Ok(())
}

fn simulate(scenario_path: &Path, out_dir: &Path) -> Result<(), RunFailure> {
    let scenario = config::load_scenario(scenario_path).context("loading scenario")?;
    let out = sim::simulate(&scenario).context("running simulation")?;
    out.write_to_dir(out_dir).context("writing logs")?;
    let n_pings: usize = out.pings_by_device.values().map(Vec::len).sum();
    println!(
        "simulated {} SLBs and {} floats for {}s: {} ping records, {} GPS fixes -> {}",
        out.slbs.len(),
        out.floats.len(),
        scenario.duration_s,
        n_pings,
        out.gps_fixes.len(),
        out_dir.display()
    );
    Ok(())
}

fn evaluate(estimates_path: &Path, truth_path: &Path) -> Result<(), RunFailure> {
    let estimates_text = fs::read_to_string(estimates_path)
        .with_context(|| format!("reading {}", estimates_path.display()))?;
    let estimates =
        output::parse_estimates_csv(&estimates_text, &estimates_path.display().to_string())
            .context("parsing estimates")?;
    let truth_text = fs::read_to_string(truth_path)
        .with_context(|| format!("reading {}", truth_path.display()))?;
    let truth = sim::parse_truth_csv(&truth_text, &truth_path.display().to_string())
        .context("parsing truth")?;

    match sim::evaluate(&estimates, &truth) {
        Ok(stats) => {
            let diagnostics = pipeline::Diagnostics {
                estimates: estimates.len() as u64,
                accepted: estimates.iter().filter(|e| e.accepted).count() as u64,
                ..pipeline::Diagnostics::default()
            };
            print!(
                "{}",
                output::render_report("evaluate", &diagnostics, Some(&stats))
            );
            Ok(())
        }
        Err(e) => Err(RunFailure::NoOutput(e.to_string())),
    }
}
