use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

mod commands;
mod manifest;

/// Environment variable holding the default precision in decimal digits.
pub const PRECISION_ENV: &str = "SDB_PRECISION_DIGITS";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or inputs; exit code 2.
    Usage(String),
    /// The computation failed; exit code 1.
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sdb",
    version,
    about = "Skin discrete breathers of the nonlinear Hatano-Nelson chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every real stationary state on a Γ grid, with stability
    Spectrum(SpectrumArgs),
    /// Power-law fits of the SDB energies and the decay coordinates
    Scaling(ScalingArgs),
    /// Reclassify the states stored in a spectrum file
    Stability(StabilityArgs),
    /// Fidelity along a linear ramp of the bare nonlinearity
    Adiabatic(AdiabaticArgs),
    /// Exact diagonalization of the leftward-hopping Bose-Hubbard chain
    Manybody(ManybodyArgs),
    /// Print the onset Γ_c of the site-2 breather
    Bifurcation,
    /// Repeat the run recorded in an output file's manifest
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryArg {
    Obc,
    Pbc,
}

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 4)]
    pub sites: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 14.0, allow_negative_numbers = true)]
    pub gamma_max: f64,
    /// Number of Γ intervals; the grid has steps + 1 points
    #[arg(long, default_value_t = 280)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Obc)]
    pub boundary: BoundaryArg,
    /// J_R / J_L with J_L = 1
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub jr_ratio: f64,
    /// Decimal digits for the stability spectra; above 15 the states are
    /// re-polished in software floats [default: $SDB_PRECISION_DIGITS or 15]
    #[arg(long)]
    pub precision: Option<u32>,
    /// Stability threshold on max Re λ [default: 1e-8, or 1e-16 above 15 digits]
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
pub struct ScalingArgs {
    #[arg(long, default_value_t = 4)]
    pub sites: usize,
    /// Branches to fit (repeatable) [default: all]
    #[arg(long = "m")]
    pub m: Vec<usize>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [1e-3, 1e-1])]
    pub gamma_window: Vec<f64>,
    /// Log-spaced Γ points in the window
    #[arg(long, default_value_t = 10)]
    pub points: usize,
    /// Γ of the decay-coordinate table
    #[arg(long, default_value_t = 0.1)]
    pub decay_gamma: f64,
    /// [default: $SDB_PRECISION_DIGITS or 60]
    #[arg(long)]
    pub precision_digits: Option<u32>,
    /// Output prefix: writes PREFIX_fits.csv, PREFIX_energies.csv, PREFIX_decay.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
pub struct StabilityArgs {
    /// A file written by `spectrum`
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub precision: Option<u32>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
pub struct AdiabaticArgs {
    #[arg(long, default_value_t = 4)]
    pub sites: usize,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 12.0)]
    pub gamma0: f64,
    /// Ramp speed v in γ(t) = γ0 − v t (repeatable)
    #[arg(long = "speed", required = true)]
    pub speed: Vec<f64>,
    /// [default: γ0 / v]
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub reltol: f64,
    /// Output prefix: writes PREFIX_v<speed>.csv per speed
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
pub struct ManybodyArgs {
    #[arg(long, default_value_t = 4)]
    pub sites: usize,
    #[arg(long, default_value_t = 4)]
    pub bosons: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub u_min: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub u_max: f64,
    /// Number of U intervals; the grid has steps + 1 points
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub hop: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Clone, Debug)]
pub struct RerunArgs {
    /// Any file written by this tool
    pub manifest: PathBuf,
    /// Replaces the recorded output path or prefix
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Scaling(a) => commands::scaling(a),
        Command::Stability(a) => commands::stability(a),
        Command::Adiabatic(a) => commands::adiabatic(a),
        Command::Manybody(a) => commands::manybody(a),
        Command::Bifurcation => commands::bifurcation(),
        Command::Rerun(a) => commands::rerun(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
