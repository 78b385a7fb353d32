//! Batch front end: every stage of the pipeline as a subcommand writing
//! into its own directory under the output root.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit code for runtime and solver failures.
pub const EXIT_RUNTIME: u8 = 1;
/// Exit code for configuration and input validation failures.
pub const EXIT_VALIDATION: u8 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: EXIT_RUNTIME, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<orthofrac::Error> for CliError {
    fn from(e: orthofrac::Error) -> Self {
        let code = match &e {
            orthofrac::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_VALIDATION,
            e if e.is_validation() => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        orthofrac::Error::Io(e).into()
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "orthofrac", version, about = "Phase-field fracture of orthotropic notched beams")]
pub struct Cli {
    /// Project configuration (TOML).
    #[arg(long, global = true, default_value = "orthofrac.toml")]
    pub config: PathBuf,
    /// Output root; overrides the configured one.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Parallel simulator evaluations during calibration.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, clap::Args, serde::Serialize)]
pub struct Overrides {
    /// Fracture toughness G_c, MPa·mm.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gc: Option<f64>,
    /// Length scale, mm.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    /// Stiffness scale C_VVVV, MPa.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cvvvv: Option<f64>,
    /// Dissipation model, AT1 or AT2.
    #[arg(long, value_parser = ["AT1", "AT2"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stiffness ratios from wave speeds and compression tests.
    EstimateElastic,
    /// Load–deflection run of the configured specimen.
    Simulate(Overrides),
    /// Fit C_VVVV and G_c to the experimental curves.
    Calibrate(Overrides),
    /// Limit and average crack surfaces from a damage field.
    ExtractCrack,
    /// Distance between the numerical and the scanned crack surfaces.
    CompareCrack,
    /// Plot-ready CSV tables from earlier outputs.
    ExportPlots,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
