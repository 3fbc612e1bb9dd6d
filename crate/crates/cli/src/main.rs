mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use nhdyadic::dyadic::delta_notice;

use crate::commands::Outcome;
use crate::config::{ExperimentConfig, Overrides};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "nhdyadic", version, about = "Dyadic systems, random grids and Tb diagnostics on finite spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment file; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; required by randomized subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the report and artifacts; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Scale ratio between generations, in (0, 1/2].
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Coarsest generation.
    #[arg(long = "kmin", global = true, allow_negative_numbers = true)]
    k_min: Option<i32>,
    /// Finest generation.
    #[arg(long = "kmax", global = true, allow_negative_numbers = true)]
    k_max: Option<i32>,
    /// Monte Carlo trials.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Goodness lag in generations.
    #[arg(long, global = true)]
    r: Option<u32>,
    /// Comma separated boundary widths.
    #[arg(long = "eps-list", global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Exponent of the BMO norms.
    #[arg(long, global = true)]
    p: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Build a dyadic system and check its invariants.
    BuildGrid,
    /// Monte Carlo checks of random dyadic systems.
    RandgridVerify,
    /// Adapted martingale decomposition and Haar function checks.
    HaarVerify,
    /// Kernel constants, upper doubling and annulus integrals.
    KernelVerify,
    /// Matrix element decay tables for separated and nested cubes.
    DecayVerify,
    /// Splitting of adjacent cube pairings.
    AdjacentVerify,
    /// Norm and constant report.
    TbReport,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::BuildGrid => "build-grid",
            Command::RandgridVerify => "randgrid-verify",
            Command::HaarVerify => "haar-verify",
            Command::KernelVerify => "kernel-verify",
            Command::DecayVerify => "decay-verify",
            Command::AdjacentVerify => "adjacent-verify",
            Command::TbReport => "tb-report",
        }
    }

    fn run(self, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
        match self {
            Command::BuildGrid => commands::build_grid(cfg),
            Command::RandgridVerify => commands::randgrid_verify(cfg),
            Command::HaarVerify => commands::haar_verify(cfg),
            Command::KernelVerify => commands::kernel_verify(cfg),
            Command::DecayVerify => commands::decay_verify(cfg),
            Command::AdjacentVerify => commands::adjacent_verify(cfg),
            Command::TbReport => commands::tb(cfg),
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        delta: cli.delta,
        k_min: cli.k_min,
        k_max: cli.k_max,
        trials: cli.trials,
        r: cli.r,
        eps: cli.eps_list.clone(),
        p: cli.p,
    }
    .apply(&mut cfg);
    cfg.validate()?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    }
    Ok(cfg)
}

fn envelope(command: Command, cfg: &ExperimentConfig, outcome: &Outcome) -> Value {
    json!({
        "tool": "nhdyadic",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": command.name(),
        "delta_notice": delta_notice(cfg.grid.delta),
        "config": cfg,
        "passed": outcome.failures.is_empty(),
        "failures": outcome.failures,
        "results": outcome.results,
    })
}

fn emit(command: Command, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<(), CliError> {
    let report = serde_json::to_string_pretty(&envelope(command, cfg, outcome)).expect("reports serialize");
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}.json", command.name()));
            std::fs::write(&path, report + "\n")?;
            for (name, contents) in &outcome.artifacts {
                std::fs::write(dir.join(name), contents)?;
            }
            let verdict = if outcome.failures.is_empty() { "passed" } else { "FAILED" };
            println!("{}: {verdict}, report written to {}", command.name(), path.display());
        }
        None => println!("{report}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let outcome = match cli.command.run(&cfg) {
        Ok(o) => o,
        Err(e @ CliError::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            Outcome { failures: vec![json!({ "error": e.to_string() })], ..Default::default() }
        }
    };
    if let Err(e) = emit(cli.command, &cfg, &outcome) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
