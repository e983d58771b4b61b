mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] subres::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => core_exit_code(e),
            _ => EXIT_NUMERIC,
        }
    }
}

fn core_exit_code(e: &subres::Error) -> u8 {
    use subres::Error as E;
    match e {
        E::InvalidArgument(_)
        | E::InvalidMeasure(_)
        | E::FiniteSupport { .. }
        | E::UnsupportedFrequencyMeasure(_)
        | E::Domination(_)
        | E::Mismatch(_)
        | E::OrderCap { .. } => EXIT_CONFIG,
        E::Sweep { source, .. } => core_exit_code(source),
        _ => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::resolve(cli.command, cli.flags).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(manifest) if manifest.checks.iter().all(|c| c.pass) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(EXIT_CHECK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
