use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hdmart_cli::config::ExperimentConfig;
use hdmart_cli::{commands, CliError};

/// Numerical laboratory for Gaussian approximation of high-dimensional
/// martingale difference sequences.
#[derive(Parser)]
#[command(name = "hdmart", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.csv / report.json; overrides the
    /// config's `output`, defaults to the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; when absent, HDMART_THREADS, then the rayon
    /// default. Results are identical for every thread count.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replication sums and report their empirical moments.
    Simulate(RunArgs),
    /// Estimate the rectangle Kolmogorov distance per horizon.
    Distance(RunArgs),
    /// Distance pipeline plus log-log rate fits of every series.
    Ratefit(RunArgs),
    /// Markov pipeline: covariance concentration, stopping-time
    /// augmentation, and both distance measurements.
    Markov(RunArgs),
    /// Verify the integral inequality sweep and the engine cross-oracle.
    Check(RunArgs),
}

fn run(args: &RunArgs, f: impl Fn(&ExperimentConfig, &std::path::Path) -> Result<(), CliError>) -> Result<(), CliError> {
    let threads = match args.threads {
        Some(t) => Some(t),
        None => std::env::var("HDMART_THREADS")
            .ok()
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    CliError::Config(format!("HDMART_THREADS must be an integer, got `{v}`"))
                })
            })
            .transpose()?,
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Config("thread count must be >= 1".into()));
        }
        // ignore the error if a pool already exists (e.g. repeated call
        // inside one test process); determinism does not depend on it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    f(&cfg, &out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => run(a, commands::cmd_simulate),
        Command::Distance(a) => run(a, commands::cmd_distance),
        Command::Ratefit(a) => run(a, commands::cmd_ratefit),
        Command::Markov(a) => run(a, commands::cmd_markov),
        Command::Check(a) => run(a, commands::cmd_check),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
