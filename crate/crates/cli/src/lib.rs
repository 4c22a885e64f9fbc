//! `pevo`: batch driver for the well-posedness pipeline.
//!
//! Every command reads a JSON run configuration, writes deterministic reports
//! into an output directory and maps the outcome onto an exit code:
//! 0 success, 1 scientific failure, 2 usage or configuration error.

mod commands;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pevo_core::PevoError;
use thiserror::Error;

pub use commands::{execute, Outcome};
pub use output::{CSV_SCHEMA, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "pevo", version, about = "Gevrey well-posedness pipeline for linear p-evolution equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check the estimate family of every corrector symbol λ_{p-k}.
    CheckSymbols(CommonArgs),
    /// Invert e^Λ(x,D) by a Neumann series.
    Invert(CommonArgs),
    /// Expand the conjugated principal symbol and compare with the exact product.
    Conjugate(CommonArgs),
    /// Select M, K, h and the sponge, and run the positivity scans.
    Constants(CommonArgs),
    /// Constants, evolution, recovery of u and the energy estimate.
    Solve(CommonArgs),
    /// Stability of the fitted energy constants under refinement.
    Energy(CommonArgs),
    /// Necessary-condition growth scan of Im a_{p-1}.
    Cn2(CommonArgs),
    /// Wave-packet growth across σ with frozen constants.
    Sweep(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::CheckSymbols(_) => "check-symbols",
            Self::Invert(_) => "invert",
            Self::Conjugate(_) => "conjugate",
            Self::Constants(_) => "constants",
            Self::Solve(_) => "solve",
            Self::Energy(_) => "energy",
            Self::Cn2(_) => "cn2",
            Self::Sweep(_) => "sweep",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Self::CheckSymbols(a)
            | Self::Invert(a)
            | Self::Conjugate(a)
            | Self::Constants(a)
            | Self::Solve(a)
            | Self::Energy(a)
            | Self::Cn2(a)
            | Self::Sweep(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `outputs.dir` of the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dotted override such as `gevrey.sigma=0.8` or `constants.M=[0,1]`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] PevoError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot write outputs: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Core(
                PevoError::InvalidConfig(_) | PevoError::InvalidGrid(_) | PevoError::Json(_) | PevoError::Io(_) | PevoError::GridMismatch,
            ) => EXIT_USAGE,
            Self::Core(_) => EXIT_FAILURE,
            Self::Csv(_) | Self::Io(_) => EXIT_USAGE,
        }
    }
}

/// Parse `args` (program name first), run the command and return the exit code.
pub fn run_from_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            for line in &outcome.diagnostics {
                eprintln!("{line}");
            }
            if outcome.pass {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
        Err(e) => {
            eprintln!("pevo {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
