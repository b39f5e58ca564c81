//! Command-line front end for designing and rate-analyzing device-independent
//! randomness expansion protocols.
//!
//! Exit codes: 0 success, 2 protocol abort (simulate), 3 infeasible score
//! distribution, 4 configuration error.

mod commands;
mod config;
mod output;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "direx", version, about = "Device-independent randomness expansion toolkit")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path (stdout when absent). Simulate writes side files
    /// derived from this path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the relaxation level from the config (e.g. "1", "2", "1+AB").
    #[arg(long, global = true)]
    level: Option<String>,
    /// Worker threads for parallel solves.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override optimizer / simulation master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also print a JSON summary to stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certified rates and finite-size bookkeeping at fixed parameters.
    Rate,
    /// Sweep a device parameter (eta, theta, werner) over a grid.
    Sweep,
    /// Optimize the min-tradeoff parameter point by gradient ascent.
    OptimizeMtf,
    /// Optimize state and measurement angles by coordinate ascent.
    OptimizeSetup,
    /// Simulate the accumulation phase and extract output bits.
    Simulate,
    /// Seed-length accounting for the input-sampling procedure.
    SeedAccount,
}

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = if err.downcast_ref::<ConfigStage>().is_some() {
                4
            } else {
                commands::exit_code_for(&err)
            };
            std::process::exit(code);
        }
    }
}

/// Marker wrapping errors raised before any solve: config loading,
/// validation, precondition checks.
#[derive(Debug)]
struct ConfigStage(anyhow::Error);

impl std::fmt::Display for ConfigStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigStage {}

fn run(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::Error::new(ConfigStage(anyhow::anyhow!("--config is required"))))?;
    let mut resolved = config::load(path, cli.level.as_deref())
        .map_err(|e| anyhow::Error::new(ConfigStage(e)))?;
    if let Some(seed) = cli.seed {
        resolved.config.optimizer.seed = seed;
        if let Some(sim) = resolved.config.simulate.as_mut() {
            sim.master_seed = seed;
        }
    }

    let (out, artifacts) = match cli.command {
        Command::Rate => (commands::cmd_rate(&resolved)?, None),
        Command::Sweep => (commands::cmd_sweep(&resolved)?, None),
        Command::OptimizeMtf => (commands::cmd_optimize_mtf(&resolved)?, None),
        Command::OptimizeSetup => (commands::cmd_optimize_setup(&resolved)?, None),
        Command::Simulate => {
            let (out, artifacts) = commands::cmd_simulate(&resolved)?;
            (out, Some(artifacts))
        }
        Command::SeedAccount => (commands::cmd_seed_account(&resolved)?, None),
    };

    match &cli.out {
        Some(path) => {
            std::fs::write(path, &out.csv)
                .with_context(|| format!("writing {}", path.display()))?;
            if let Some(artifacts) = &artifacts {
                if let Some(bits) = &artifacts.bits {
                    let p = path.with_extension("bits");
                    std::fs::write(&p, bits).with_context(|| format!("writing {}", p.display()))?;
                }
                if let Some(log) = &artifacts.rounds_log {
                    let p = path.with_extension("rounds");
                    std::fs::write(&p, log).with_context(|| format!("writing {}", p.display()))?;
                }
            }
        }
        None => print!("{}", out.csv),
    }
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&out.summary)?);
    }
    Ok(out.exit_code)
}
