//! Command-line front end: simulate benchmark trials, fit the two
//! estimation algorithms, draw CEP plots, run replication studies and
//! sensitivity scans. All outputs are plain delimited text or SVG and are
//! byte-reproducible for a fixed seed and configuration.

mod commands;
mod config;
mod plot;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// User or configuration problem; exit code 2.
    #[error("{0}")]
    Config(String),
    /// Numerical or sampler failure; exit code 3.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> CliError {
        CliError::Numeric(msg.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<surrocep::data::DataError> for CliError {
    fn from(e: surrocep::data::DataError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<surrocep::SamplerError> for CliError {
    fn from(e: surrocep::SamplerError) -> Self {
        match e {
            surrocep::SamplerError::Model(m) => m.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<surrocep::sim::SimError> for CliError {
    fn from(e: surrocep::sim::SimError) -> Self {
        use surrocep::sim::SimError;
        match e {
            SimError::UnknownSetting(_)
            | SimError::OddSampleSize(_)
            | SimError::IncompleteConfig(_)
            | SimError::Data(_) => CliError::Config(e.to_string()),
            SimError::Model(m) => m.into(),
            SimError::Sampler(s) => s.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<surrocep::model::ModelError> for CliError {
    fn from(e: surrocep::model::ModelError) -> Self {
        match e {
            // Asking for a difference endpoint without designating a
            // baseline column is a configuration problem.
            surrocep::model::ModelError::MissingBaseline => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o error: {e}"))
    }
}

/// Principal-surrogate validation toolkit for trials where the biomarker
/// is identically zero under control.
#[derive(Parser)]
#[command(name = "surrocep", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark or custom trial dataset.
    Simulate(commands::simulate::SimulateArgs),
    /// Fit one dataset with the imputation or observed-data algorithm.
    Fit(commands::fit::FitArgs),
    /// Plot causal-effect-predictiveness curves from saved draws.
    Cep(commands::cep::CepArgs),
    /// Run a replication study and summarize bias, SE, SD and coverage.
    Replicate(commands::replicate::ReplicateArgs),
    /// Scan fixed values or priors for the nonidentified T-correlation.
    Sensitivity(commands::sensitivity::SensitivityArgs),
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Fit(args) => commands::fit::run(args),
        Command::Cep(args) => commands::cep::run(args),
        Command::Replicate(args) => commands::replicate::run(args),
        Command::Sensitivity(args) => commands::sensitivity::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

/// Honors SURROCEP_THREADS as a cap on worker threads.
fn init_thread_pool() {
    if let Ok(raw) = std::env::var("SURROCEP_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Seed from the flag/config or, failing that, system entropy (logged so
/// the run can be reproduced).
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s} (from entropy; pass --seed {s} to reproduce)");
            s
        }
    }
}
