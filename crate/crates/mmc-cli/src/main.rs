//! Experiment driver for monotonic matrix completion.
//!
//! Subcommands: `synth` (generate a synthetic problem), `complete` (run a
//! completion algorithm and emit metrics), `effective-rank` (sweep the
//! effective rank of a linked matrix), `fitlink` (fit the monotone link to
//! given pairs), and `split` (partition an observation file).
//!
//! Every command is deterministic given its seed; metric JSON differs
//! between identical re-runs only in the wall-time field. The output root
//! for relative paths can be redirected with `MMC_OUT_ROOT`.

mod commands;
mod config;
mod metrics;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mmc", version, about = "Monotonic matrix completion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic low-rank-plus-link problem and write its files.
    Synth(SynthArgs),
    /// Run a completion algorithm and write matrix, trace, and metrics.
    Complete(CompleteArgs),
    /// Effective rank of a matrix pushed through a link, over a c sweep.
    EffectiveRank(EffectiveRankArgs),
    /// Fit the Lipschitz monotone link to (z, x) pairs.
    Fitlink(FitlinkArgs),
    /// Partition an observation file into train/validation/test.
    Split(SplitArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Rows of the generated matrix.
    #[arg(long)]
    n: usize,
    /// Columns of the generated matrix.
    #[arg(long)]
    m: usize,
    /// Rank of the latent factor product.
    #[arg(long)]
    r: usize,
    /// Logistic steepness of the link.
    #[arg(long)]
    c: f64,
    /// Per-cell observation probability.
    #[arg(long)]
    p: f64,
    /// Standard deviation of additive observation noise.
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    /// Resample noise draws until every observed value lies in [-1, 1].
    #[arg(long)]
    bound: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (joined under MMC_OUT_ROOT when relative).
    #[arg(long, default_value = "mmc-out")]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    /// Calibrated-loss alternating solver.
    MmcC,
    /// Squared-loss alternating solver.
    MmcLs,
    /// One-step estimator (optionally with validation rank selection).
    #[value(name = "mmc-1")]
    Mmc1,
    /// Identity-link low-rank baseline.
    LrmcBaseline,
}

#[derive(Args, Default)]
struct CompleteArgs {
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,

    /// Training observations (triplet file). Mutually exclusive with --synth-*.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Validation observations (triplet file).
    #[arg(long)]
    val: Option<PathBuf>,
    /// Test observations (triplet file).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Observation files use 1-indexed rows and columns.
    #[arg(long)]
    one_indexed: bool,

    /// Generate synthetic data per seed instead of reading files.
    #[arg(long)]
    synth_n: Option<usize>,
    #[arg(long)]
    synth_m: Option<usize>,
    #[arg(long)]
    synth_r: Option<usize>,
    #[arg(long)]
    synth_c: Option<f64>,
    #[arg(long)]
    synth_p: Option<f64>,
    #[arg(long)]
    synth_noise_sd: Option<f64>,
    #[arg(long)]
    synth_bound: bool,

    /// Fixed projection rank.
    #[arg(long)]
    rank: Option<usize>,
    /// Candidate ranks for mmc-1 validation selection, comma separated.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// Increasing rank schedule as r0,r_inc,r_max,progress_eps.
    #[arg(long)]
    schedule: Option<String>,
    /// Lipschitz bound for the link fit.
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Gradient step size (default: scaled by inverse observation rate).
    #[arg(long)]
    eta: Option<f64>,
    /// Outer iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative training-residual stopping threshold.
    #[arg(long)]
    threshold: Option<f64>,

    /// ADMM penalty parameter.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps_abs: Option<f64>,
    #[arg(long)]
    eps_rel: Option<f64>,
    #[arg(long)]
    admm_max_iters: Option<usize>,

    /// Seeds to run, comma separated; one output cell per seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads for independent seed cells.
    #[arg(long)]
    jobs: Option<usize>,
    /// TOML config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum LinkKind {
    Logistic,
    Identity,
}

#[derive(Args)]
struct EffectiveRankArgs {
    /// Dense CSV matrix to link and measure.
    #[arg(long)]
    matrix: PathBuf,
    /// Tail-energy fraction defining the effective rank.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = LinkKind::Logistic)]
    link: LinkKind,
    /// Steepness values to sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    c_values: Vec<f64>,
    /// Output CSV path (joined under MMC_OUT_ROOT when relative).
    #[arg(long, default_value = "effective-rank.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct FitlinkArgs {
    /// Covariates, one value per line.
    #[arg(long)]
    z: PathBuf,
    /// Targets, one value per line.
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    lipschitz: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-2)]
    eps_abs: f64,
    #[arg(long, default_value_t = 1e-2)]
    eps_rel: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value = "mmc-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Observation triplet file to partition.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    one_indexed: bool,
    #[arg(long, default_value_t = 0.0)]
    train_frac: f64,
    #[arg(long, default_value_t = 0.0)]
    val_frac: f64,
    /// Per-row draw counts as k_train,k_val (Jester-style splits).
    #[arg(long)]
    per_row: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "mmc-out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Complete(args) => commands::complete::run(args),
        Command::EffectiveRank(args) => commands::effective_rank::run(args),
        Command::Fitlink(args) => commands::fitlink::run(args),
        Command::Split(args) => commands::split_cmd::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
