use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::ConfigError;

/// Simulate, fit and test observation-driven Poisson count models.
#[derive(Debug, Parser)]
#[command(name = "cpk", version, about)]
struct Cli {
    /// Worker threads for replicate loops (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a trajectory and write it as CSV `t,N,lambda`.
    Simulate(SimulateArgs),
    /// Fit a parametric family to a count series by conditional maximum likelihood.
    Fit(FitArgs),
    /// Run the dispersion specification test on a count series.
    Test(TestArgs),
    /// Estimate non-coalescence of coupled chains against the mixing bound.
    Mixing(MixingArgs),
    /// Reconstruct intensities from past counts and tabulate errors against the bound.
    Reconstruct(ReconstructArgs),
    /// Run a Monte Carlo study described by a JSON config.
    Study(StudyArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Model spec, or an object with `model`, `n`, `burn_in`, `seed`, `lambda_start`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Initial intensity before burn-in (default: the stationary mean bound).
    #[arg(long)]
    lambda_start: Option<f64>,
    /// CSV destination; a provenance sidecar `<out>.json` is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with a column `N`.
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    family: Option<String>,
    /// Object with optional `family`, `theta_init`, `fit`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda_start: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TestArgs {
    /// CSV with a column `N`.
    #[arg(long)]
    counts: PathBuf,
    /// Composite null over this family.
    #[arg(long, conflicts_with = "hypothesis")]
    family: Option<String>,
    /// Hypothesis JSON: `{"mode":"simple","model":…}` or `{"mode":"composite","family":…}`.
    #[arg(long)]
    hypothesis: Option<PathBuf>,
    /// Object with optional `hypothesis`, `alpha`, `lambda_start`, `fit`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda_start: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MixingArgs {
    /// Model spec, or an object with `model`, `n_values`, `tail`, `replicates`, `seed`, `pool_size`.
    #[arg(long)]
    config: PathBuf,
    /// Lags, e.g. `1,2,5` or `1..10`.
    #[arg(long)]
    n_values: Option<String>,
    #[arg(long)]
    tail: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV `n,empirical_nonconv,bound,se,trunc_err`; the full summary goes to `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// Trajectory CSV with columns `N` and `lambda`.
    #[arg(long)]
    trajectory: PathBuf,
    /// Model spec (default: the model recorded in the trajectory's `.json` sidecar).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Depths, e.g. `1..20` (default) or `1,5,10`.
    #[arg(long, default_value = "1..20")]
    depths: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Study config tagged by `"study"`: size, normality, mixing, moment or estimation.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-replicate CSV `replicate,value[,reject]`.
    #[arg(long)]
    values_out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<cpk::Error>() {
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(config::config_error("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| commands::run(cli.command))),
        None => commands::run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
