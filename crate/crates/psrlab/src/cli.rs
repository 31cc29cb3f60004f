//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psr_core::Caps;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "psrlab", version, about = "Numerical laboratory for B-stable PSRs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    /// Enumeration caps, with `PSRLAB_CAP` overriding the trajectory budget.
    pub fn caps_from_env(&self) -> Result<Caps, CliError> {
        match std::env::var("PSRLAB_CAP") {
            Err(_) => Ok(Caps::default()),
            Ok(text) => text
                .parse::<usize>()
                .map(Caps::with_max_trajectories)
                .map_err(|_| CliError::Config(format!("PSRLAB_CAP is not a number: {text:?}"))),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a B-representation of a model and certify its stability.
    Certify(CertifyArgs),
    /// Run a learning algorithm over a model class, one run per seed.
    Learn(LearnArgs),
    /// Run a verification suite and report pass/fail with worst slack.
    Verify(VerifyArgs),
    /// Write a named fixture (model or class) as a JSON file.
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Construction {
    Revealing,
    Decodable,
    #[value(name = "future-suff")]
    FutureSuff,
    Regular,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    /// Model file path, or a fixture name (FIX-ID, FIX-NOISY, FIX-DEC2, FIX-LMDP).
    #[arg(long)]
    pub model: String,
    #[arg(long, value_enum)]
    pub construct: Construction,
    /// Core test window.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Random directions per step refining the stability lower bound.
    #[arg(long, default_value_t = 128)]
    pub samples: usize,
    /// Nonnegative pairs per step for the weak-stability check.
    #[arg(long, default_value_t = 64)]
    pub weak_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for report.json + manifest.json (stdout only if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Algorithm {
    Omle,
    E2d,
    Mops,
    Rfe2d,
}

#[derive(Debug, Args, Serialize)]
pub struct LearnArgs {
    /// Model-class file path (JSON), or NOISY-CLASS for the built-in class.
    #[arg(long)]
    pub class: String,
    #[arg(long, value_enum)]
    pub alg: Algorithm,
    /// Iterations (OMLE) or episodes (the E2D family).
    #[arg(long = "T")]
    pub t: usize,
    /// Information-regret trade-off (E2D family).
    #[arg(long, default_value_t = 10.0)]
    pub gamma: f64,
    /// Confidence-set width (OMLE).
    #[arg(long, default_value_t = 13.4)]
    pub beta: f64,
    /// Tempered-aggregation rate; defaults to the per-algorithm standard
    /// (1/3 E2D, 1/6 MOPS, 1/2 RF-E2D) when not given.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Comma-separated seed list, e.g. 0,1,2.
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "psrlab-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Suite {
    Brep,
    Stability,
    Decomp,
    Hellinger,
    Eluder,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Instances per seed for the randomized suites.
    #[arg(long, default_value_t = 25)]
    pub per_seed: usize,
    /// Output directory for the suite report (stdout only if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FixtureArgs {
    /// FIX-ID | FIX-NOISY | FIX-DEC2 | FIX-LMDP | RANDOM-REVEALING |
    /// RANDOM-DECODABLE | NOISY-CLASS.
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Smallest admissible emission singular value for random draws.
    #[arg(long, default_value_t = 0.3)]
    pub sigma_floor: f64,
    #[arg(long)]
    pub out: PathBuf,
}
