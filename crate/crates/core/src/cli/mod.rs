//! The `resgreedy` batch runner.
//!
//! Every subcommand reads one JSON config (`--config`), writes its artifacts
//! into `--out` through write-then-rename, and returns a stable exit code:
//! 0 success, 1 check failure, 2 config error, 3 numerical error. Floats in
//! result files are written with 17 significant digits and no timestamps, so
//! reruns with the same config and seed are byte-identical.

pub mod config;
mod commands;
pub mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;

#[derive(Parser, Debug)]
#[command(name = "resgreedy", version, about = "Resolvent surrogates and greedy snapshot selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed given in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Command {
    /// Greedy selection over a diffusivity family.
    Greedy,
    /// Greedy selection over a density family.
    DensityGreedy,
    /// Runs one verification check.
    Verify {
        #[arg(value_enum)]
        check: Check,
    },
    /// Online approximation from a stored greedy basis.
    Online,
    /// L∞ best approximation from CSV input.
    Minimax,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Theorem1,
    NormIdentity,
    Surrogate,
    Density,
    OperatorIdentity,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Theorem1 => "theorem1",
            Check::NormIdentity => "norm_identity",
            Check::Surrogate => "surrogate",
            Check::Density => "density",
            Check::OperatorIdentity => "operator_identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalBreakdown(_)
            | Error::NotPositiveDefinite { .. }
            | Error::NoConvergence { .. }
            | Error::DegenerateProbe(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    CheckFailed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Passed
        } else {
            Outcome::CheckFailed
        }
    }
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

pub fn exit_code(result: &Result<Outcome, CliError>) -> u8 {
    match result {
        Ok(Outcome::Passed) => EXIT_OK,
        Ok(Outcome::CheckFailed) => EXIT_CHECK_FAILED,
        Err(CliError::Config(_)) => EXIT_CONFIG,
        Err(CliError::Numerical(_)) => EXIT_NUMERICAL,
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let config = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let ctx = commands::Context {
        config,
        out: &cli.out,
        seed: cli.seed,
    };
    match cli.command {
        Command::Greedy => commands::greedy(&ctx, crate::FamilyKind::Diffusivity),
        Command::DensityGreedy => commands::greedy(&ctx, crate::FamilyKind::Density),
        Command::Verify { check } => commands::verify(&ctx, check),
        Command::Online => commands::online(&ctx),
        Command::Minimax => commands::minimax(&ctx),
    }
}

/// Parses `std::env::args`, runs, and reports errors on stderr.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli);
    match &result {
        Ok(Outcome::Passed) => {}
        Ok(Outcome::CheckFailed) => eprintln!("resgreedy: check failed"),
        Err(e) => eprintln!("resgreedy: {e}"),
    }
    ExitCode::from(exit_code(&result))
}
