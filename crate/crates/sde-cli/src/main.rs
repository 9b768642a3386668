//! Command-line laboratory for single-channel speaker distance estimation:
//! dataset synthesis, training, evaluation, ablation grids, cross-corpus
//! matrices, and attention-map inspection.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Worker-count environment variable; defaults to all cores.
const WORKERS_ENV: &str = "SDE_WORKERS";

#[derive(Parser)]
#[command(name = "sde", about = "speaker distance estimation laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CommonArgs {
    /// Experiment configuration (YAML or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured dataset (audio, sidecars, manifest).
    Generate(CommonArgs),
    /// Train a model on the configured dataset split.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Start from an existing checkpoint instead of random weights.
        #[arg(long)]
        finetune_from: Option<PathBuf>,
    },
    /// Evaluate a checkpoint: binned report, prediction dump, plot data.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint to evaluate (defaults to <out>/train/best.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print dataset statistics (histograms, split sizes, RT60 percentiles).
    Stats(CommonArgs),
    /// Train and evaluate every architecture row of the configured grid.
    Ablate(CommonArgs),
    /// Train per-corpus models and evaluate every train/test corpus pairing.
    Crosscorpus {
        #[command(flatten)]
        common: CommonArgs,
        /// Fine-tune on each target corpus before evaluating it.
        #[arg(long)]
        finetune: bool,
    },
    /// Export spectrogram, attention maps, and predictions for one clip.
    Inspect {
        /// Audio clip to analyze.
        #[arg(long)]
        clip: PathBuf,
        /// Trained checkpoint (attention must be enabled).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory for the exported matrices.
        #[arg(long, default_value = "inspect_out")]
        out: PathBuf,
    },
}

/// Exit-code contract: 0 success, 1 partial grid failure, 2 invalid
/// input/config.
fn main() -> ExitCode {
    if let Ok(workers) = std::env::var(WORKERS_ENV) {
        if let Ok(n) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate::run(&args),
        Command::Train {
            common,
            finetune_from,
        } => commands::train::run(&common, finetune_from),
        Command::Eval { common, checkpoint } => commands::eval::run(&common, checkpoint),
        Command::Stats(args) => commands::stats::run(&args),
        Command::Ablate(args) => commands::ablate::run(&args),
        Command::Crosscorpus { common, finetune } => commands::crosscorpus::run(&common, finetune),
        Command::Inspect {
            clip,
            checkpoint,
            out,
        } => commands::inspect::run(&clip, &checkpoint, &out),
    };
    match result {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::PartialFailure) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
