//! Batch front end for `gmv-core`: one JSON document in, one JSON or CSV
//! document out. See `docs/schema.md` for the input and output layouts.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;

pub mod commands;
pub mod error;
pub mod io;
pub mod report;
pub mod schema;

pub use error::CliError;
use report::Csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// CARA coefficient from a gamble and its certainty equivalent.
    Calibrate,
    /// Risky-asset weights (CARA, risk parity, minimax, two-state).
    Allocate,
    /// Scalar leverage of a portfolio under log or power utility.
    Leverage,
    /// Stake on a binary bet, fixed or Bayesian odds.
    Bet,
    /// Monte-Carlo statistics of a drift-uncertain process or betting game.
    Simulate,
    /// CARA allocation followed by GMV leverage of the result.
    Pipeline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::Allocate => "allocate",
            Command::Leverage => "leverage",
            Command::Bet => "bet",
            Command::Simulate => "simulate",
            Command::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "gmv-alloc",
    version,
    about = "Optimal diversification and leverage from JSON inputs"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,

    /// Input JSON document, or `-` for stdin.
    #[arg(long, short)]
    pub input: PathBuf,

    /// Output file, written atomically. Stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Random seed for `simulate`; overrides the document.
    #[arg(long)]
    pub seed: Option<u64>,

    /// GMV variance penalty; overrides the document.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// CARA coefficient; overrides the document.
    #[arg(long = "risk-aversion")]
    pub risk_aversion: Option<f64>,

    /// Horizon in periods; overrides the document.
    #[arg(long)]
    pub horizon: Option<f64>,
}

/// Flag values that override fields of the input document.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub risk_aversion: Option<f64>,
    pub horizon: Option<f64>,
}

impl Overrides {
    /// Rejects flags the command has no use for, so a typo'd invocation
    /// fails instead of silently ignoring a parameter.
    fn check(&self, command: Command) -> Result<(), CliError> {
        use Command::*;
        let allowed = |flag: &str| match flag {
            "seed" => command == Simulate,
            "lambda" => matches!(command, Leverage | Bet | Pipeline),
            "risk-aversion" => matches!(command, Allocate | Pipeline),
            "horizon" => matches!(command, Leverage | Simulate | Pipeline),
            _ => false,
        };
        let given = [
            ("seed", self.seed.is_some()),
            ("lambda", self.lambda.is_some()),
            ("risk-aversion", self.risk_aversion.is_some()),
            ("horizon", self.horizon.is_some()),
        ];
        for (flag, set) in given {
            if set && !allowed(flag) {
                return error::invalid(format!("--{flag} does not apply to `{}`", command.name()));
            }
        }
        Ok(())
    }
}

fn encode<T: Serialize + Csv>(report: &T, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(format!("json: {e}")))?;
            s.push('\n');
            Ok(s.into_bytes())
        }
        Format::Csv => report.to_csv(),
    }
}

/// Runs one command and returns the encoded output document.
pub fn execute(command: Command, input: &std::path::Path, format: Format, ov: Overrides) -> Result<Vec<u8>, CliError> {
    ov.check(command)?;
    match command {
        Command::Calibrate => encode(&commands::calibrate(io::read_json(input)?)?, format),
        Command::Allocate => encode(&commands::allocate(io::read_json(input)?, ov)?, format),
        Command::Leverage => encode(&commands::leverage(io::read_json(input)?, ov)?, format),
        Command::Bet => encode(&commands::bet(io::read_json(input)?, ov)?, format),
        Command::Simulate => encode(&commands::simulate(io::read_json(input)?, ov)?, format),
        Command::Pipeline => encode(&commands::pipeline(io::read_json(input)?, ov)?, format),
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let ov = Overrides {
        seed: cli.seed,
        lambda: cli.lambda,
        risk_aversion: cli.risk_aversion,
        horizon: cli.horizon,
    };
    let bytes = execute(cli.command, &cli.input, cli.format, ov)?;
    io::write_atomic(cli.output.as_deref(), &bytes)
}
