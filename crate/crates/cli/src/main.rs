//! `mstcar`: simulate panels, fit the model, and export posterior summaries.
//!
//! Exit codes: 0 success, 1 invalid configuration or inputs, 2 failure at
//! run time.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use failure::{CliResult, Failure};

#[derive(Parser)]
#[command(name = "mstcar", version, about = "Nonseparable multivariate space-time CAR models for count panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `chain.seed`
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; overrides `threads`
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Fit the separable model (common ρ, time-invariant G)
    #[arg(long, global = true)]
    separable: bool,

    /// Write a checkpoint every N iterations; overrides `checkpoint_every`
    #[arg(long, global = true, value_name = "N")]
    checkpoint_every: Option<u64>,

    /// Continue `fit` from the checkpoint in the output directory
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Draw a synthetic panel, adjacency and true rates
    Simulate,
    /// Run the sampler and save the sample store
    Fit,
    /// Empirical-Bayes Poisson-gamma comparator
    Baseline,
    /// Rates, declines, saved person-years, Σ_η trajectories, coverage
    Metrics,
    /// Hyperparameter quantiles with ESS and split R-hat
    Summarize,
}

fn run(cli: Cli) -> CliResult<()> {
    let ov = Overrides {
        seed: cli.seed,
        threads: cli.threads,
        separable: cli.separable,
        checkpoint_every: cli.checkpoint_every,
        resume: cli.resume,
    };
    if ov.resume && !matches!(cli.command, Command::Fit) {
        return Err(Failure::Validation("--resume only applies to `fit`".into()));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &ov)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Fit => commands::fit(&cfg, &ov),
        Command::Baseline => commands::baseline(&cfg),
        Command::Metrics => commands::metrics(&cfg, &ov),
        Command::Summarize => commands::summarize(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mstcar: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
