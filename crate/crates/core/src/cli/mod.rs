//! Command-line front end: argument parsing, dispatch and exit codes.
//!
//! Exit codes: 0 success, 1 failed verification (or an unexpected
//! computation error), 2 unusable arguments or configuration, 3 invalid
//! channel, 4 budget exceeded.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_compare, cmd_exponent, cmd_simulate, cmd_verify, compute_bound, sweep, Comparison, VerifySummary,
};
pub use config::{Bound, RunConfig, Units};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(
    name = "abcx",
    version,
    about = "Error exponents of the asymmetric broadcast channel"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the selected bounds on the rate grid and write CSV.
    Exponent(CommonArgs),
    /// Rank the selected bounds per rate point and flag dominance violations.
    Compare(CommonArgs),
    /// Sample codes and estimate their error probabilities.
    Simulate(CommonArgs),
    /// Cross-check every exponent against brute-force references.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration. `verify` falls back to a built-in one.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV destination (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG chart destination (`compare` only).
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for rate points.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Units of printed tables and charts; CSV stays in nats.
    #[arg(long, value_enum, default_value = "nats")]
    pub units: UnitsArg,
    /// Record wall-clock milliseconds per CSV row instead of 0.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum UnitsArg {
    Nats,
    Bits,
}

impl From<UnitsArg> for Units {
    fn from(u: UnitsArg) -> Units {
        match u {
            UnitsArg::Nats => Units::Nats,
            UnitsArg::Bits => Units::Bits,
        }
    }
}

/// Configuration `verify` uses without `--config`.
pub const DEFAULT_VERIFY_CONFIG: &str = r#"{
  "channel": {"w1": [[0.95, 0.05], [0.05, 0.95]], "w2": [[0.85, 0.15], [0.15, 0.85]]},
  "ensemble": {"p_u": [0.5, 0.5], "p_x_given_u": [[0.85, 0.15], [0.15, 0.85]]},
  "rates": {"r_y": [0.02, 0.1], "r_z": [0.0, 0.05]}
}"#;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidChannel(_) => 3,
        Error::BudgetExceeded(_) => 4,
        Error::Parse(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

fn emit(path: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> crate::Result<()> {
    match path {
        Some(p) => output::write_atomic(p, text),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// Runs one command, writing results to `stdout` and files; returns the exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> crate::Result<i32> {
    let (args, is_verify) = match &cli.command {
        Command::Verify(a) => (a, true),
        Command::Exponent(a) | Command::Compare(a) | Command::Simulate(a) => (a, false),
    };
    let config = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io(io) => Error::Parse(format!("{}: {io}", p.display())),
            other => other,
        })?,
        None if is_verify => RunConfig::from_json(DEFAULT_VERIFY_CONFIG)?,
        None => return Err(Error::Parse("--config is required".into())),
    };
    let csv_path = args.out.clone().or_else(|| config.output.csv.clone());
    let svg_path = args.svg.clone().or_else(|| config.output.svg.clone());
    let p = config.prepare(args.seed)?;
    let units = Units::from(args.units);
    match cli.command {
        Command::Exponent(_) => {
            let csv = cmd_exponent(&p, args.jobs, args.timing)?;
            emit(&csv_path, &csv, stdout)?;
            Ok(0)
        }
        Command::Compare(_) => {
            let c = cmd_compare(&p, args.jobs, args.timing, units)?;
            stdout.write_all(c.table.as_bytes())?;
            if let Some(path) = &csv_path {
                output::write_atomic(path, &c.csv)?;
            }
            if let Some(path) = &svg_path {
                output::write_atomic(path, &c.svg)?;
            }
            Ok(0)
        }
        Command::Simulate(_) => {
            let csv = cmd_simulate(&p, args.jobs)?;
            emit(&csv_path, &csv, stdout)?;
            Ok(0)
        }
        Command::Verify(_) => {
            let summary = cmd_verify(&p)?;
            let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(stdout, "{json}")?;
            Ok(if summary.passed { 0 } else { 1 })
        }
    }
}
