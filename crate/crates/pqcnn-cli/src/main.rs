//! Command-line harness: configuration-driven dataset generation, training,
//! evaluation and state inspection for the photonic convolutional
//! classifier. All runs are offline batch computations; every run writes a
//! `config.echo.json` with the fully resolved settings.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::RunContext;
use config::ExperimentConfig;

/// Errors classified by exit code: 2 config, 3 data, 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<pqcnn_core::Error> for CliError {
    fn from(e: pqcnn_core::Error) -> Self {
        use pqcnn_core::Error as E;
        match e {
            E::Capacity { .. }
            | E::Dimension { .. }
            | E::BasisMismatch
            | E::BadSlot { .. }
            | E::FilterShape { .. }
            | E::EmptyBin { .. }
            | E::InvalidTag { .. } => CliError::Config(e.to_string()),
            E::Data { .. }
            | E::Io { .. }
            | E::InsufficientSamples { .. }
            | E::ZeroNorm
            | E::NotRankOne { .. } => CliError::Data(e.to_string()),
            E::NotUnitary { .. }
            | E::NotDensity { .. }
            | E::NotNormalized { .. }
            | E::NoEventMass
            | E::NonFinite { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pqcnn",
    about = "Photonic convolutional classifier: generate datasets, train, evaluate, inspect"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the seed (dataset seed for `generate`, training base seed
    /// otherwise).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Encode non-outer-product images as their nearest rank-1 approximation.
    #[arg(long)]
    nearest_rank1: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset and write it to the output directory.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the model and write per-seed metrics, models and a summary.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the epoch count; 0 evaluates the initialization only.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a saved model on the configured dataset's test split.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Trained model JSON (as written by `train`).
        #[arg(long)]
        model: PathBuf,
    },
    /// Dump the detection distribution after one pipeline stage.
    Inspect {
        #[command(flatten)]
        common: CommonArgs,
        /// Sample index into the configured dataset.
        #[arg(long)]
        index: usize,
        /// One of: qdl, conv, pooling, dense, readout.
        #[arg(long)]
        stage: String,
        /// Optional trained model JSON; defaults to a fresh initialization
        /// from the training seed.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn context(common: &CommonArgs, seed_applies_to_dataset: bool) -> Result<RunContext, CliError> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        if seed_applies_to_dataset {
            config.dataset.seed = seed;
        } else {
            config.train.seed = seed;
        }
    }
    let out_dir = common
        .out
        .clone()
        .unwrap_or_else(|| config.output.dir.clone());
    Ok(RunContext {
        config,
        out_dir,
        nearest_rank1: common.nearest_rank1,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { common } => {
            let ctx = context(&common, true)?;
            commands::cmd_generate(&ctx)
        }
        Command::Train { common, epochs } => {
            let ctx = context(&common, false)?;
            commands::cmd_train(&ctx, epochs)
        }
        Command::Eval { common, model } => {
            let ctx = context(&common, false)?;
            commands::cmd_eval(&ctx, &model)
        }
        Command::Inspect {
            common,
            index,
            stage,
            model,
        } => {
            let ctx = context(&common, false)?;
            commands::cmd_inspect(&ctx, index, &stage, model.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
