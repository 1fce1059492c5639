//! Command-line front end: config loading, subcommand dispatch, artifact
//! output. Exit codes: 0 success, 1 validation or consistency failure,
//! 2 solver non-convergence or infeasibility, 3 simulation abort.

pub mod commands;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use fmc_core::config::ModelParams;
use fmc_core::error::{ConfigError, SimError, SolveError};

#[derive(Debug, Parser)]
#[command(
    name = "fmc",
    version,
    about = "Admission control and resource allocation for a follow-me-cloud data center"
)]
pub struct Cli {
    /// Path to a `key = value` config file (defaults apply when omitted).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config key, e.g. `--set lambda_n=2.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,

    /// Master random seed for simulations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output path (file, or directory for dump-model).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format for tabular results.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    pub format: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the constrained model and write the JSON result document.
    Solve(commands::SolveArgs),
    /// Simulate one policy and write per-replication metrics.
    Simulate(commands::SimulateArgs),
    /// Run all policies over an arrival-rate grid and write the data table.
    Sweep(commands::SweepArgs),
    /// Check analytic against simulated behavior for one policy.
    Compare(commands::CompareArgs),
    /// Export the enumerated states, kernel, and reward terms as CSV.
    DumpModel(commands::DumpModelArgs),
    /// Export the distance-chain matrix and distance distribution as CSV.
    DumpMobility(commands::DumpMobilityArgs),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(#[from] SolveError),
    #[error("{0}")]
    Simulation(#[from] SimError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("consistency check failed: {0}")]
    ConsistencyFailed(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) | CliError::ConsistencyFailed(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Simulation(_) => 3,
        }
    }
}

/// Loads parameters from the config file (or defaults), applies `--set`
/// overrides, and validates.
pub fn load_params(cli: &Cli) -> Result<ModelParams, CliError> {
    let mut params = match &cli.config {
        Some(path) => ModelParams::from_file(path)?,
        None => ModelParams::default(),
    };
    for kv in &cli.set {
        let (key, value) = kv.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("--set expects KEY=VALUE, got `{kv}`"))
        })?;
        params.set(key.trim(), value.trim())?;
    }
    Ok(params.validate()?)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let params = load_params(&cli)?;
    match &cli.command {
        Command::Solve(args) => commands::solve(&cli, args, &params),
        Command::Simulate(args) => commands::simulate(&cli, args, &params),
        Command::Sweep(args) => commands::sweep(&cli, args, &params),
        Command::Compare(args) => commands::compare(&cli, args, &params),
        Command::DumpModel(args) => commands::dump_model(&cli, args, &params),
        Command::DumpMobility(args) => commands::dump_mobility(&cli, args, &params),
    }
}
