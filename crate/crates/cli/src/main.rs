use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{Context, Failure, Outcome};

/// Penalized matrix regression: fits, tuning and Monte-Carlo checks.
#[derive(Parser, Debug)]
#[command(name = "schatten", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// `key=value` override, applied after the file is read. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Fit one penalized estimator.
    Fit,
    /// Cross-validate a grid of penalties.
    Tune,
    /// Monte-Carlo check of the oracle inequality.
    VerifyOracle,
    /// Exact check of the Bernstein condition on a ball.
    VerifyBernstein,
    /// Excess risk against sample size.
    Rate,
    /// Excess risk across matrix shapes.
    DimensionFree,
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| config::ConfigError::new("--config", "required"))?;
    let mut sets = cli.sets.clone();
    if let Some(seed) = cli.seed {
        sets.push(format!("run.seed={seed}"));
    }
    let (mut cfg, overrides) = config::load(path, &sets)?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    let ctx = Context { cfg, overrides };
    let job = || match cli.command {
        Command::Fit => commands::fit(&ctx),
        Command::Tune => commands::tune(&ctx),
        Command::VerifyOracle => commands::verify_oracle(&ctx),
        Command::VerifyBernstein => commands::verify_bernstein(&ctx),
        Command::Rate => commands::rate(&ctx),
        Command::DimensionFree => commands::dimension_free(&ctx),
    };
    match cli.jobs {
        Some(0) => Err(config::ConfigError::new("--jobs", "must be at least 1").into()),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Failure::Run(e.to_string()))?
            .install(job),
        None => job(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            match outcome.failure {
                None => ExitCode::SUCCESS,
                Some(reason) => {
                    eprintln!("error: {reason}");
                    ExitCode::from(2)
                }
            }
        }
        Err(e @ Failure::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e @ Failure::Run(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
