//! Experiment driver for low-rank recovery from random Pauli measurements:
//! TOML config in, CSV rows plus a JSON sidecar out.
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;
pub mod seeds;


pub use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Contract(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pauli-tomo",
    version,
    about = "Low-rank recovery experiments from random Pauli measurements"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Result CSV; the sidecar goes next to it with a `.json` extension.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Overrides `master_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Measure and recover `trials` states for a single configuration.
    Recover,
    /// Recover over the Cartesian product of the `[sweep]` ranges.
    Sweep,
    /// Estimate restricted isometry constants of drawn operators.
    Rip,
    /// Check the nuclear-norm preimage construction on random data.
    Nnq,
    /// Write the states recovery trials would use.
    StateGen,
    /// Write the operators recovery trials would use.
    OpGen,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = Config::load(path)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .ok_or_else(|| CliError::Config("no output path (--out or `output`)".into()))?;
    if out.extension().is_some_and(|e| e == "json") {
        return Err(CliError::Config(
            "the result file cannot end in .json".into(),
        ));
    }
    match (cli.command, config.sweep.is_some()) {
        (Command::Recover, true) => {
            return Err(CliError::Config(
                "config has a [sweep] section; use `sweep`".into(),
            ))
        }
        (Command::Sweep, false) => {
            return Err(CliError::Config("`sweep` needs a [sweep] section".into()))
        }
        _ => {}
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let ctx = commands::Context {
        config: &config,
        out: &out,
        pool,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Recover => commands::recover(&ctx, "recover"),
        Command::Sweep => commands::recover(&ctx, "sweep"),
        Command::Rip => commands::rip(&ctx),
        Command::Nnq => commands::nnq(&ctx),
        Command::StateGen => commands::state_gen(&ctx),
        Command::OpGen => commands::op_gen(&ctx),
    }
}
