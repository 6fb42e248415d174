//! `edwards`: command-line front end for the samplers, spectral solver,
//! kernel evaluators and verification suites.

mod commands;
mod config;
mod emit;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use thiserror::Error;

use commands::Command;
use config::Params;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid value: {0}")]
    Validation(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("suite {0} failed")]
    SuiteFailed(String),
    #[error(transparent)]
    Compute(edwards::Error),
}

impl From<edwards::Error> for CliError {
    fn from(e: edwards::Error) -> Self {
        match e {
            edwards::Error::Parameter(m) | edwards::Error::Parse(m) => CliError::Validation(m),
            edwards::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Compute(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::SuiteFailed(_) | CliError::Compute(_) => 1,
            CliError::Usage(_) | CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "edwards", version = commands::VERSION, about = "Edwards polymer measure: samplers, spectra, kernels, verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    params: Params,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let params = cli.params.merge_config()?;
    params.validate()?;
    if let Some(k) = params.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    commands::dispatch(&cli.command, &params)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("edwards: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
