use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "fqv",
    version,
    about = "Pathwise integration along partitions: generate paths, build partitions, run experiments",
    long_about = None,
    after_help = "Exit status: 0 when every tolerance check passes, 1 when a check fails, 2 on usage or config errors.\nFQV_THREADS caps the number of worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a path and write it as binary and CSV
    Generate(GenerateArgs),
    /// Build a partition ladder on a path and write it as CSV and JSON
    Partition(PartitionArgs),
    /// Quadratic variation along a partition ladder
    Qv(ExperimentArgs),
    /// Riemann sums of the vertical gradient and the change-of-variable residual
    Integrate(ExperimentArgs),
    /// Pathwise isometry gap (dyadic, or hitting-time with --lebesgue)
    Isometry(ExperimentArgs),
    /// Hitting-time partition statistics m(n), mesh and scaled counts
    Lebesgue(LebesgueArgs),
    /// Riemann sums along the step approximation against sums along the path
    Uniqueness(ExperimentArgs),
    /// Exponent fit of the first-order remainder (or the second-order expansion)
    Remainder(RemainderArgs),
    /// Rough-smooth decomposition of t -> F(t, w_t)
    Decompose(ExperimentArgs),
    /// Monte Carlo check of the Ito isometry over Brownian seeds
    ItoMc(ItoMcArgs),
    /// Sampled evidence for the Lipschitz and oscillation assumptions
    Assumptions(ExperimentArgs),
    /// Print a summary of a written report and exit with its status
    Report(ReportArgs),
}

/// Flags shared by every experiment subcommand.
#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// JSON experiment config; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory for reports and the manifest
    #[arg(long, value_name = "DIR", default_value = "fqv-out")]
    pub out: PathBuf,
    /// Path seed (overrides the seed inside --path)
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Number of grid intervals M
    #[arg(long, value_name = "M")]
    pub grid: Option<usize>,
    /// Horizon T
    #[arg(long, value_name = "T")]
    pub horizon: Option<f64>,
    /// Dyadic ladder n = A..B
    #[arg(long, value_name = "A:B", conflicts_with = "lebesgue")]
    pub dyadic: Option<String>,
    /// Hitting-time ladder n = A..B with optional level base
    #[arg(long, value_name = "A:B[:BASE]")]
    pub lebesgue: Option<String>,
    /// Built-in functional name or inline JSON expression
    #[arg(long, value_name = "SPEC")]
    pub functional: Option<String>,
    /// Path mini-spec, e.g. brownian:seed=42, fbm:hurst=0.4,seed=7, constant:3.0, linear:slope=1
    #[arg(long, value_name = "SPEC")]
    pub path: Option<String>,
    /// Override a named tolerance (repeatable)
    #[arg(long, value_name = "NAME=VAL")]
    pub tol: Vec<String>,
    /// Compute levels in parallel (results are identical)
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct RemainderArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    /// Fit the second-order expansion residual instead of the first-order remainder
    #[arg(long)]
    pub expansion: bool,
    /// Dyadic lags 2^A..2^B in grid steps
    #[arg(long, value_name = "A:B")]
    pub scales: Option<String>,
    /// Samples per scale (at least 16)
    #[arg(long, value_name = "N")]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ItoMcArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    /// Seed range A..B (inclusive)
    #[arg(long, value_name = "A:B")]
    pub seeds: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Path mini-spec
    #[arg(long, value_name = "SPEC")]
    pub path: String,
    #[arg(long, value_name = "DIR", default_value = "fqv-out")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "M")]
    pub grid: Option<usize>,
    #[arg(long, value_name = "T")]
    pub horizon: Option<f64>,
    /// Number of coordinates
    #[arg(long, value_name = "D")]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// Path mini-spec (needed for hitting-time ladders)
    #[arg(long, value_name = "SPEC", default_value = "constant:0")]
    pub path: String,
    #[arg(long, value_name = "DIR", default_value = "fqv-out")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "M")]
    pub grid: Option<usize>,
    #[arg(long, value_name = "T")]
    pub horizon: Option<f64>,
    #[arg(long, value_name = "A:B", conflicts_with = "lebesgue")]
    pub dyadic: Option<String>,
    #[arg(long, value_name = "A:B[:BASE]")]
    pub lebesgue: Option<String>,
}

#[derive(Debug, Args)]
pub struct LebesgueArgs {
    /// Path mini-spec
    #[arg(long, value_name = "SPEC")]
    pub path: String,
    #[arg(long, value_name = "DIR", default_value = "fqv-out")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "M")]
    pub grid: Option<usize>,
    #[arg(long, value_name = "T")]
    pub horizon: Option<f64>,
    /// Levels n = A..B with optional level base
    #[arg(long, visible_alias = "lebesgue", value_name = "A:B[:BASE]", default_value = "4:9")]
    pub levels: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A report.json written by an experiment subcommand
    #[arg(value_name = "FILE")]
    pub report: PathBuf,
}
