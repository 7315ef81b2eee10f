//! Command-line front end for the size-structured harvest model.
//!
//! Exit codes: 0 success, 1 filesystem trouble, 2 configuration or
//! validation failure, 3 numerical failure (bracket or CFL), 4 partial
//! report (some stages failed, manifest written).

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use commands::{Context, Failure};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment fallback for `--jobs`.
const JOBS_ENV: &str = "STRUCTURED_HARVEST_JOBS";

#[derive(Parser)]
#[command(
    name = "structured-harvest",
    version,
    about = "Size-structured fishery model: stationary analysis, forward simulation, and threshold-policy optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file; defaults reproduce the reference scenario.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Number of size cells (overrides the config).
    #[arg(long, global = true, value_name = "N")]
    cells: Option<usize>,

    /// Harvest threshold in cm (simulate: optional policy; adjoint: required).
    #[arg(long, global = true, value_name = "CM")]
    threshold: Option<f64>,

    /// Simulation horizon in yr (overrides the config).
    #[arg(long, global = true, value_name = "YR")]
    horizon: Option<f64>,

    /// Worker threads for sweeps (0 = all cores); falls back to
    /// STRUCTURED_HARVEST_JOBS.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the no-harvest closure and export the stationary profile.
    Steady,
    /// Export the replacement-index curve and the critical crowding level.
    Replacement,
    /// Run the forward transport solver under an optional threshold policy.
    Simulate,
    /// Sweep candidate thresholds and refine the revenue optimum.
    Sweep,
    /// Stationary shadow-value and switching analysis at one threshold.
    Adjoint,
    /// Full reproduction bundle: steady state, replacement, trajectories,
    /// sweep, adjoint, profile comparison, and a manifest.
    Report,
}

fn resolve_jobs(flag: Option<usize>) -> Result<usize, Failure> {
    if let Some(jobs) = flag {
        return Ok(jobs);
    }
    match std::env::var(JOBS_ENV) {
        Ok(text) => text.parse().map_err(|_| {
            Failure::Validation(format!("{JOBS_ENV} must be an integer, got {text:?}"))
        }),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Validation)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(cells) = cli.cells {
        config.n_cells = cells;
    }
    if let Some(horizon) = cli.horizon {
        config.params.horizon = horizon;
    }
    let jobs = resolve_jobs(cli.jobs)?;
    let ctx = Context::prepare(config, jobs)?;
    let horizon = ctx.config.params.horizon;

    match cli.command {
        Command::Steady => commands::run_steady(&ctx),
        Command::Replacement => commands::run_replacement(&ctx),
        Command::Simulate => commands::run_simulate(&ctx, cli.threshold, horizon),
        Command::Sweep => commands::run_sweep(&ctx),
        Command::Adjoint => {
            let l_star = cli
                .threshold
                .ok_or_else(|| Failure::Validation("adjoint requires --threshold <CM>".into()))?;
            commands::run_adjoint(&ctx, l_star)
        }
        Command::Report => commands::run_report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(match failure {
                Failure::Io(_) => 1u8,
                Failure::Validation(_) => 2,
                Failure::Numerical(_) => 3,
                Failure::Partial(_) => 4,
            })
        }
    }
}
