//! Command-line pipeline runner.
//!
//! Exit codes: 0 success, 2 configuration/validation failure, 3 backend
//! failure, 4 quality-threshold breach.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use lexchain::corpus::Split;
use lexchain::evaluation::BaselineKind;

use commands::RunContext;
use config::{parse_backend_override, Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Threshold(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Threshold(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for Split {
    fn from(arg: SplitArg) -> Split {
        match arg {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineArg {
    Majority,
    Minority,
    Random,
}

#[derive(Parser)]
#[command(
    name = "lexchain",
    about = "Prompt-chaining pipeline for long-document classification",
    version
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Override a backend endpoint, e.g. `generate=http://host:8080/gen`.
    #[arg(long = "backend-override", global = true, value_parser = parse_backend_override)]
    backend_override: Vec<(lexchain::backend::BackendKind, String)>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a split into a JSON Lines summaries file.
    Summarize {
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        /// Summarize only a seeded sample of this many documents.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Embed the training summaries and build the vector index.
    Index,
    /// Classify a split against the training index.
    Classify {
        #[arg(long, value_enum, default_value = "dev")]
        split: SplitArg,
        /// Classify only a seeded sample of this many documents.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Score a predictions file against gold labels.
    Eval {
        #[arg(long, value_enum, default_value = "dev")]
        split: SplitArg,
        /// Predictions file (defaults to this run's own).
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// File of document ids to evaluate as a subset.
        #[arg(long)]
        subset: Option<PathBuf>,
    },
    /// Score a trivial baseline classifier.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineArg,
        #[arg(long, value_enum, default_value = "dev")]
        split: SplitArg,
    },
    /// summarize -> index -> classify -> eval in one run.
    Pipeline {
        #[arg(long, value_enum, default_value = "dev")]
        split: SplitArg,
        #[arg(long)]
        limit: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let overrides = Overrides {
        seed: cli.seed,
        workers: cli.workers,
        backends: cli.backend_override,
    };
    let config = RunConfig::load(&config_path, &overrides)?;
    let ctx = RunContext::new(config)?;

    match cli.command {
        Command::Summarize { split, limit } => commands::summarize::run(&ctx, split.into(), limit),
        Command::Index => commands::index::run(&ctx),
        Command::Classify { split, limit } => {
            commands::classify::run(&ctx, split.into(), limit).map(|_| ())
        }
        Command::Eval {
            split,
            predictions,
            subset,
        } => commands::eval::run(
            &ctx,
            &commands::eval::EvalArgs {
                split: split.into(),
                predictions,
                subset,
            },
        )
        .map(|_| ()),
        Command::Baseline { kind, split } => {
            let kind = match kind {
                BaselineArg::Majority => BaselineKind::Majority,
                BaselineArg::Minority => BaselineKind::Minority,
                BaselineArg::Random => BaselineKind::Random {
                    seed: ctx.config.seed,
                },
            };
            commands::baseline::run(&ctx, kind, split.into())
        }
        Command::Pipeline { split, limit } => commands::pipeline::run(&ctx, split.into(), limit),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
