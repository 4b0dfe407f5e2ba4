//! `uwp`: synthetic-panel generation, sample preparation, the wage-growth
//! decomposition pipeline, and the estimator verification battery.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 estimation error, 4 verification failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "uwp", version, about = "Urban wage growth premium decomposition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-period panel with planted ground truth.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured generator seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Filter, deflate, pair, residualize, and compute coworker statistics.
    Prepare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the decomposition grid, transitions, and projections.
    Decompose {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict the control sets to one specification (the baseline is
        /// kept for reference).
        #[arg(long)]
        only: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the oracle and planted-recovery battery; nonzero exit on failure.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Optional directory for the machine-readable outcome table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub enum CliError {
    Config(String),
    Stage { stage: String, source: uwp_core::Error },
    VerifyFailed(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl CliError {
    fn stage(stage: &str) -> impl Fn(uwp_core::Error) -> CliError + '_ {
        move |source| CliError::Stage {
            stage: stage.to_string(),
            source,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            CliError::Stage { stage, source } => format!("{stage}: {source}"),
            CliError::VerifyFailed(m) => m.clone(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Stage { source, .. } => match source.category() {
                uwp_core::ErrorCategory::Config => 1,
                uwp_core::ErrorCategory::Data => 2,
                uwp_core::ErrorCategory::Estimation => 3,
            },
            CliError::VerifyFailed(_) => 4,
        }
    }
}

fn init_threads(cli_threads: Option<usize>, config_threads: usize) {
    let n = cli_threads.unwrap_or(config_threads);
    if n > 0 {
        // Determinism does not depend on the pool size; this only bounds it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.synth.seed = seed;
            }
            init_threads(threads, cfg.threads);
            commands::generate::run(&cfg, &out)
        }
        Command::Prepare {
            config,
            panel,
            out,
            threads,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            init_threads(threads, cfg.threads);
            commands::prepare::run(&cfg, &panel, &out)
        }
        Command::Decompose {
            config,
            panel,
            out,
            only,
            threads,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            init_threads(threads, cfg.threads);
            commands::decompose::run(&cfg, &panel, &out, only.as_deref())
        }
        Command::Verify {
            config,
            threads,
            out,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            init_threads(threads, cfg.threads);
            commands::verify::run(&cfg, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
