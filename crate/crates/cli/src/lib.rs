//! Command-line front end: simulation, reconstruction, analysis and metrics
//! over on-disk tensors, CSV tables and JSON manifests.

pub mod commands;
pub mod config;
pub mod output;
pub mod tensor;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use prosep::sampling::SchemeKind;

pub use config::RunConfig;
pub use tensor::Tensor;

/// Exit status when the solver stops at `max_iters` without meeting its
/// tolerance; outputs are still written.
pub const EXIT_NOT_CONVERGED: i32 = 2;
/// Exit status for invalid input, I/O and every other failure.
pub const EXIT_FAILURE: i32 = 1;

/// Returned by `reconstruct` after writing its outputs when the solver did
/// not converge.
#[derive(Debug, Clone, Copy)]
pub struct NotConverged {
    pub iterations: usize,
}

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "solver stopped after {} iterations without converging",
            self.iterations
        )
    }
}

impl std::error::Error for NotConverged {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<NotConverged>().is_some() {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_FAILURE
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "prosep",
    version,
    about = "Dynamic tomography from time-sequential projections"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a moving phantom and acquire one projection per time sample.
    Simulate(SimulateArgs),
    /// Recover the temporal subspace and harmonic coefficients, then the movie.
    Reconstruct(ReconstructArgs),
    /// Conditioning studies and bound tables.
    Analyze(AnalyzeArgs),
    /// Per-frame PSNR, SSIM and MAE of a movie against a benchmark.
    Metrics(MetricsArgs),
}

/// Where the base configuration comes from; the built-in default otherwise.
#[derive(Debug, Args, Default)]
#[group(multiple = false)]
pub struct ConfigSource {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named hyperparameter preset, e.g. `p512-symm`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Replay the configuration recorded in a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Overrides of individual configuration fields.
#[derive(Debug, Args, Default)]
pub struct ModelOverrides {
    /// Truncation order K of the temporal model.
    #[arg(short = 'K', long)]
    pub psm_order: Option<usize>,
    /// Highest circular harmonic N.
    #[arg(short = 'N', long)]
    pub max_harmonic: Option<usize>,
    /// Dimension d of the temporal interpolation space.
    #[arg(short = 'd', long)]
    pub subspace_dim: Option<usize>,
    #[arg(long)]
    pub symmetric: Option<bool>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub solver_seed: Option<u64>,
    #[arg(long)]
    pub allow_underdetermined: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    #[command(flatten)]
    pub model: ModelOverrides,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub scheme: Option<SchemeKind>,
    #[arg(long)]
    pub scheme_seed: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Use a motionless object.
    #[arg(long)]
    pub r#static: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Directory written by `simulate`.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Output directory; defaults to the input directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Take K, N, d and the symmetry flag from a named preset.
    #[arg(long)]
    pub preset: Option<String>,
    #[command(flatten)]
    pub model: ModelOverrides,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Condition numbers of both subproblems for the three angular schemes.
    #[arg(long)]
    pub table1: bool,
    /// Full-column-rank sweep of the coefficient subproblem.
    #[arg(long)]
    pub thm2: bool,
    /// `κ(L2) ≤ √κ(Γ)` sweep.
    #[arg(long)]
    pub thm3: bool,
    /// Translation and rotation truncation bounds for K = 0..=max-order.
    #[arg(long)]
    pub bounds: bool,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Trials for the rank and bound sweeps.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Random-scheme draws for the conditioning table.
    #[arg(long, default_value_t = 1000)]
    pub random_trials: usize,
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = 3.0)]
    pub c_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = std::f64::consts::PI / 16.0)]
    pub theta_max: f64,
    #[arg(long, default_value_t = 12)]
    pub max_order: usize,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub movie: PathBuf,
    #[arg(long)]
    pub benchmark: PathBuf,
    #[arg(long, short, default_value = "metrics.csv")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Reconstruct(args) => commands::reconstruct(&args),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Metrics(args) => commands::metrics(&args),
    }
}
