//! `psrlab` — certify stability of B-representations, run the learning
//! algorithms over model classes, and execute the verification suites.
//!
//! Exit codes: 0 success, 1 failed checks or runtime errors, 2 invalid
//! configuration (missing files, malformed arguments). Errors are also
//! emitted as structured JSON on stdout.

mod artifacts;
mod cli;
mod ops;
mod suites;

use clap::Parser;

use cli::{Cli, Command};

/// Error wrapper distinguishing configuration mistakes from runtime failures.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(anyhow::Error),
    /// A verification suite ran fine but found violations.
    ChecksFailed(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) | CliError::ChecksFailed(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Run(_) => "run",
            CliError::ChecksFailed(_) => "checks-failed",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) | CliError::ChecksFailed(m) => m.clone(),
            CliError::Run(e) => format!("{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<psr_core::Error> for CliError {
    fn from(e: psr_core::Error) -> Self {
        CliError::Run(anyhow::Error::new(e))
    }
}

fn main() {
    let cli = Cli::parse();
    let caps = match cli.caps_from_env() {
        Ok(c) => c,
        Err(e) => {
            emit_error(&e);
            std::process::exit(e.exit_code());
        }
    };
    let outcome = match cli.command {
        Command::Certify(args) => ops::certify(&args, &caps),
        Command::Learn(args) => ops::learn(&args, &caps),
        Command::Verify(args) => suites::verify(&args, &caps),
        Command::Fixture(args) => ops::fixture(&args, &caps),
    };
    match outcome {
        Ok(()) => {}
        Err(e) => {
            emit_error(&e);
            std::process::exit(e.exit_code());
        }
    }
}

fn emit_error(e: &CliError) {
    let json = serde_json::json!({
        "error": e.message(),
        "kind": e.kind(),
    });
    println!("{}", serde_json::to_string_pretty(&json).expect("error json"));
}
