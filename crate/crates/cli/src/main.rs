//! `spacedeform` command-line front end.

mod bundle;
mod commands;
mod common;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Kind};

#[derive(Debug, Parser)]
#[command(name = "spacedeform", version, about = "Space deformation models for non-stationary kriging and simulation")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SPACEDEFORM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with a known deformation.
    Gen(GenArgs),
    /// Estimate the deformation and the variogram and write a fit bundle.
    Fit(FitArgs),
    /// Ordinary kriging at target locations.
    Krige(KrigeArgs),
    /// Conditional Gaussian simulation at target locations.
    Simulate(SimulateArgs),
    /// Cross-validation tables for the bandwidth and mixing weight.
    Cv(CvArgs),
    /// Variogram contour samples and deformed-space exports.
    Diag(DiagArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Example {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    example: Example,
    /// Number of irregular locations (1d).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Grid side (2d).
    #[arg(long, default_value_t = spacedeform::synthetic::DEFAULT_SIDE_2D)]
    grid: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a random train/validation split, e.g. `1200,1000`.
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<usize>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Options shared by `fit` and `cv`.
#[derive(Debug, Args)]
struct ModelArgs {
    /// Data CSV with header `x,z` or `x,y,z`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Anchor CSV with header `x` or `x,y`.
    #[arg(long, conflicts_with = "anchor_grid")]
    anchors: Option<PathBuf>,
    /// Regular anchor grid over the data bounding box, e.g. `11,11`.
    #[arg(long, value_delimiter = ',')]
    anchor_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    omega_grid: Option<Vec<f64>>,
    /// Bandwidths kept after the first cross-validation stage.
    #[arg(long)]
    shortlist: Option<usize>,
    /// NMDS convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Lag classes of the experimental variogram.
    #[arg(long)]
    n_lags: Option<usize>,
    /// Variogram cutoff in the deformed space.
    #[arg(long)]
    max_dist: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Fixed bandwidth; skips the search when given with --omega.
    #[arg(long)]
    lambda: Option<f64>,
    /// Fixed mixing weight.
    #[arg(long)]
    omega: Option<f64>,
    /// Fit the stationary baseline (identity deformation).
    #[arg(long)]
    stationary: bool,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    model: ModelArgs,
}

/// Where predictions are wanted.
#[derive(Debug, Args)]
struct TargetArgs {
    /// Fit bundle written by `fit`.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Conditioning data; defaults to the data recorded in the bundle.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target CSV with header `x` or `x,y`.
    #[arg(long, conflicts_with = "target_grid")]
    targets: Option<PathBuf>,
    /// Regular target grid over the data bounding box, e.g. `50,50`.
    #[arg(long, value_delimiter = ',')]
    target_grid: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct KrigeArgs {
    #[command(flatten)]
    targets: TargetArgs,
    /// Validation data `x[,y],z`; its locations are the targets when none are given, and scores are reported.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    targets: TargetArgs,
    #[arg(long)]
    n_real: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run Monte Carlo checks against simple kriging and write check.json.
    #[arg(long)]
    check: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagArgs {
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Data to export in deformed coordinates.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Probe CSV with header `x` or `x,y`; defaults to a 3-per-axis grid inside the data box.
    #[arg(long)]
    probes: Option<PathBuf>,
    /// Disc radius around each probe (default: a quarter of the largest box side).
    #[arg(long)]
    radius: Option<f64>,
    /// Offsets per half-axis of the disc grid.
    #[arg(long, default_value_t = 10)]
    resolution: usize,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.threads.or(config.threads) {
        Some(0) => return Err(CliError::usage("--threads must be positive")),
        Some(n) => spacedeform::parallel::set_num_threads(n),
        None => {}
    }
    match cli.command {
        Command::Gen(args) => commands::gen::run(args, &config),
        Command::Fit(args) => commands::fit::run(args, &config),
        Command::Krige(args) => commands::krige::run(args, &config),
        Command::Simulate(args) => commands::simulate::run(args, &config),
        Command::Cv(args) => commands::cv::run(args, &config),
        Command::Diag(args) => commands::diag::run(args, &config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Kind::Usage.exit_code() } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.kind.exit_code()
        }
    }
}
