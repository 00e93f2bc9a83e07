//! `scc`: batch command-line front end for sparse convex clustering.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scc_core::SccError;

#[derive(Parser)]
#[command(name = "scc", version, about = "Sparse convex clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a simulated data set.
    Simulate(SimulateArgs),
    /// Fit one (gamma1, gamma2) point.
    Fit(FitArgs),
    /// Fit a gamma1 path at fixed gamma2.
    Path(PathArgs),
    /// Select (gamma1, gamma2) by bootstrap stability.
    Tune(TuneArgs),
    /// Rand index and feature selection rates.
    Evaluate(EvaluateArgs),
    /// Table of method scores over simulated repetitions.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub setting: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the number of observations.
    #[arg(long)]
    pub n: Option<usize>,
    /// Override the number of features.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Weight, factor and solver flags shared by the fitting commands.
#[derive(Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "sama")]
    pub algorithm: String,
    /// Fusion norm: 1, 2 or inf.
    #[arg(long, default_value = "2")]
    pub q: String,
    #[arg(long, default_value_t = 5)]
    pub knn: usize,
    #[arg(long, default_value_t = 0.5)]
    pub phi: f64,
    /// Kernel on raw squared distances instead of per-feature means.
    #[arg(long)]
    pub raw_kernel: bool,
    /// `auto` or a positive step size.
    #[arg(long, default_value = "auto")]
    pub nu: String,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Factors from a gamma2 = 0 pilot fit instead of uniform ones.
    #[arg(long)]
    pub adaptive_factors: bool,
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub gamma1: f64,
    #[arg(long)]
    pub gamma2: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Add the column means back to the reported centers.
    #[arg(long)]
    pub emit_raw_centers: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PathArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated ascending gamma1 values. Without it the grid runs
    /// from 0 to the fusing value.
    #[arg(long, value_delimiter = ',')]
    pub gamma1: Vec<f64>,
    /// Points of the automatic grid.
    #[arg(long, default_value_t = 10)]
    pub points: usize,
    #[arg(long, default_value_t = 0.0)]
    pub gamma2: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub emit_raw_centers: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// JSON object with `gamma1` and `gamma2` arrays.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Predicted labels, one per line.
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Selected features (1-based, one per line).
    #[arg(long, requires_all = ["informative", "p"])]
    pub selected: Option<PathBuf>,
    /// Informative features (1-based, one per line).
    #[arg(long, requires_all = ["selected", "p"])]
    pub informative: Option<PathBuf>,
    /// Total number of features.
    #[arg(long)]
    pub p: Option<usize>,
    /// Also write the JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub setting: u8,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "kmeans,ama,sama")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub gamma1_points: usize,
    #[arg(long, default_value_t = 12)]
    pub gamma2_points: usize,
    #[arg(long, default_value = "benchmark.csv")]
    pub out: PathBuf,
}

fn thread_pool() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SCC_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| io::input_error(format!("SCC_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(io::input_error("SCC_THREADS must be a positive integer, got '0'"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<io::InputError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<SccError>() {
        Some(SccError::SearchFailed(_)) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = thread_pool().and_then(|()| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Path(a) => commands::path(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Benchmark(a) => commands::benchmark(&a),
    });
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
