use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hydra_core::grid::AnchorConvention;

#[derive(Parser, Debug)]
#[command(
    name = "hydra",
    version,
    about = "Checks, benchmarks and forecasts for the two-dimensional EGD memory"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Overrides the pass/fail tolerance of the subcommand.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Where head-2 gradients are evaluated in exact runs.
    #[arg(long, global = true, value_enum)]
    pub anchor: Option<Anchor>,

    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Emit the report as CSV.
    #[arg(long, global = true)]
    pub csv: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Anchor {
    PrevTimeBoth,
    PerHeadPredecessor,
}

impl From<Anchor> for AnchorConvention {
    fn from(a: Anchor) -> Self {
        match a {
            Anchor::PrevTimeBoth => AnchorConvention::PrevTimeBoth,
            Anchor::PerHeadPredecessor => AnchorConvention::PerHeadPredecessor,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reproduce the 3x6 worked example.
    Golden,
    /// Run the oracle, closed-form, superposition and 1D-reduction suites.
    Equiv(EquivArgs),
    /// Compare the analytic gradient with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Time exact against chunked evaluation.
    Bench(BenchArgs),
    /// Forecast a CSV file or a synthetic SAR series and score it.
    Forecast(ForecastArgs),
}

#[derive(Args, Debug)]
pub struct EquivArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..=8))]
    pub max_v: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..=64))]
    pub max_t: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..=8))]
    pub max_d: u64,
    /// Flip one sign in every suite to show failures are caught.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Largest key/value dimension.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..=8))]
    pub dim: u64,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long = "t", default_value_t = 4096, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: u64,
    #[arg(long = "v", default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub variates: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub chunk_t: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Synthetic {
    Sar,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    /// Wide CSV with one column per variate.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// First CSV column holds time stamps.
    #[arg(long, requires = "input")]
    pub time_col: bool,
    #[arg(long, value_enum)]
    pub synthetic: Option<Synthetic>,
    /// Number of non-seasonal lags; must match the length of --phi.
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of seasonal lags; must match the length of --eta-seasonal.
    #[arg(long)]
    pub q: Option<usize>,
    /// Seasonal period, also used for the lag window and the metrics.
    #[arg(long, default_value_t = 12)]
    pub s: usize,
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "0.6,0.2"
    )]
    pub phi: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "0.15"
    )]
    pub eta_seasonal: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 4)]
    pub variates: usize,
    /// Generated length; defaults to context + horizon + 200.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 96)]
    pub context: usize,
    #[arg(long, default_value_t = 24)]
    pub horizon: usize,
    #[arg(long, default_value_t = 1)]
    pub chunk_t: usize,
    #[arg(long, default_value_t = 1)]
    pub chunk_v: usize,
    /// Also write the generated series as CSV.
    #[arg(long)]
    pub dump_data: Option<PathBuf>,
}
