mod cache;
mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coverlab_core::CoverError;

#[derive(Parser, Debug)]
#[command(name = "coverlab", version, about = "Correlation asymptotics for Markov skew products on lattice covers")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "coverlab-out")]
    out: PathBuf,
    /// Always recompute, neither reading nor writing the cache.
    #[arg(long, global = true)]
    no_cache: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Leading twisted eigenvalue over a torus grid (surface.csv).
    Spectrum(SpectrumArgs),
    /// Expansion coefficients and jets (expansion.json, jets.json).
    Expand(ExpandArgs),
    /// Exact correlations against the expansion (correlation.csv, expansion.json).
    Correlate(CorrelateArgs),
    /// Run the acceptance suite on the built-in fixtures.
    Verify,
    /// Drift regime prediction against exact shifted correlations (drift.csv).
    Drift(DriftArgs),
    /// Fiber-mode decay rates and the nonzero-mode remainder (u1.csv, u1.json).
    U1(U1Args),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArg {
    /// Model file: an edge list, or an Ulam specification.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ObsArgs {
    /// Observable f; defaults to the indicator of (state 0, origin, k = 0).
    #[arg(long)]
    pub obs_f: Option<PathBuf>,
    /// Observable g; defaults to f.
    #[arg(long)]
    pub obs_g: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Points per axis.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Fiber mode.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub k: i64,
}

#[derive(Args, Debug)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub obs: ObsArgs,
    /// Number of expansion terms.
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Nonzero fiber modes that must be mixing.
    #[arg(long, default_value_t = 0)]
    pub k_band: usize,
}

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub obs: ObsArgs,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 0)]
    pub k_band: usize,
    #[arg(long, default_value_t = 1)]
    pub t_min: usize,
    #[arg(long, default_value_t = 400)]
    pub t_max: usize,
    #[arg(long, default_value_t = 1)]
    pub t_step: usize,
    /// auto, brute, floquet or k-split.
    #[arg(long, default_value = "auto")]
    pub method: String,
}

#[derive(Args, Debug)]
pub struct DriftArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub obs: ObsArgs,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    /// Shift direction as comma-separated integers; defaults to the first axis.
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    /// Comma-separated times.
    #[arg(long, default_value = "100,200,400,800")]
    pub t_values: String,
}

#[derive(Args, Debug)]
pub struct U1Args {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub obs: ObsArgs,
    #[arg(long, default_value_t = 1)]
    pub k_band: usize,
    #[arg(long, default_value_t = 100)]
    pub t_min: usize,
    #[arg(long, default_value_t = 200)]
    pub t_max: usize,
    #[arg(long, default_value_t = 10)]
    pub t_step: usize,
    /// Points per axis for the spectral-radius supremum.
    #[arg(long, default_value_t = 4096)]
    pub grid: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli.command, &cli.out, !cli.no_cache) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error [{}]: {e}", e.provenance());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

pub type Result<T> = std::result::Result<T, CoverError>;
