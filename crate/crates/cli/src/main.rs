//! Benchmark driver for subspace cubic Newton and first-order baselines.
//!
//! Three subcommands: `run` executes a configured sweep and writes trace
//! CSVs plus metadata, `verify` checks a family of library guarantees, and
//! `reference` caches a high-accuracy solution so later runs report gaps.
//! Exit codes: 0 on success, 1 when a run or property fails, 2 on
//! configuration errors.

mod config;
mod runner;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::CliError;
use crate::verify::Suite;

#[derive(Parser)]
#[command(name = "sscn", version, about = "Stochastic subspace cubic Newton benchmark driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured (algorithm × seed) pair and write trace CSVs
    /// plus a metadata report.
    Run {
        /// Path to the experiment JSON.
        #[arg(long)]
        config: PathBuf,
        /// Write outputs here instead of the configured output_dir.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a family of library guarantees, printing pass/fail per property.
    Verify {
        /// Property family to check.
        #[arg(value_enum)]
        suite: Suite,
        /// Experiment JSON supplying the objective under test (defaults to a
        /// built-in logistic instance).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Minimize the configured objective to high accuracy and cache the
    /// result for gap columns in later runs.
    Reference {
        /// Path to the experiment JSON.
        #[arg(long)]
        config: PathBuf,
        /// Write the cache here instead of the configured output_dir.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output } => runner::cmd_run(&config, output),
        Command::Verify { suite, config } => verify::cmd_verify(suite, config.as_deref()),
        Command::Reference { config, output } => runner::cmd_reference(&config, output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}
