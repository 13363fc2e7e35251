//! Command-line front end: `prepare`, `simulate`, `fit`, `summarize` and
//! `diagnose`.
//!
//! Exit codes: 0 on success, 1 when a strict convergence check fails, 2 on
//! usage or data errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use occupancy::pipeline::{self, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "occupancy-cli", version, about = "Spatiotemporal site-occupancy models for opportunistic sightings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Turn raw sightings and covariates into visits, presence and site tables.
    Prepare,
    /// Write a synthetic sightings dataset and its truth.
    Simulate,
    /// Fit the model to prepared data and write one draw file per chain.
    Fit,
    /// Write occupancy maps, trends, phenology and other summaries.
    Summarize,
    /// Recompute convergence diagnostics (and recovery, for simulated data).
    Diagnose,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `paths.output_dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides the sampler and simulation seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    chains: Option<usize>,
    /// Iterations per chain, warmup included.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    warmup: Option<usize>,
    /// Report but do not fail on R-hat >= 1.1 or more than 1% divergences.
    #[arg(long, global = true)]
    no_strict: bool,
    /// Two chains of ten iterations, for checking a setup quickly.
    #[arg(long, global = true)]
    smoke: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let c = cli.common;
    let overrides = Overrides {
        output_dir: c.output_dir,
        seed: c.seed,
        chains: c.chains,
        iterations: c.iterations,
        warmup: c.warmup,
        no_strict: c.no_strict,
        smoke: c.smoke,
    };
    let result = RunConfig::resolve(c.config.as_deref(), &overrides).and_then(|cfg| match cli.command {
        Command::Prepare => pipeline::cmd_prepare(&cfg),
        Command::Simulate => pipeline::cmd_simulate(&cfg),
        Command::Fit => pipeline::cmd_fit(&cfg),
        Command::Summarize => pipeline::cmd_summarize(&cfg),
        Command::Diagnose => pipeline::cmd_diagnose(&cfg),
    });
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
    }
}
