mod args;
mod commands;
mod scenario;

use std::process::ExitCode;

use clap::Parser;
use sit_core::error::Error;

use crate::args::{Cli, Command};

/// Exit status 1 for domain outcomes, 2 for usage, configuration and IO problems.
#[derive(Debug)]
pub enum Failure {
    Domain(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Domain(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. }
            | Error::SynthesisFailed { .. }
            | Error::ThetaBelowThreshold { .. }
            | Error::NoPersistenceEquilibrium(_)
            | Error::NegativeControl(_) => Failure::Domain(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(cli.params.as_deref(), a),
        Command::Threshold => commands::threshold(cli.params.as_deref()),
        Command::Certify(a) => commands::certify(cli.params.as_deref(), a),
        Command::Synthesize(a) => commands::synthesize(cli.params.as_deref(), a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
