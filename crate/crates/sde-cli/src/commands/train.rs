use std::path::PathBuf;

use anyhow::{Context, Result};

use sde_core::rng::derive_seed;
use sde_core::scenegen::{config_hash, Split};
use sde_core::training::{load_split, train};

use super::{load_manifest, write_run_summary, Outcome, RunSummary};
use crate::config::ExperimentConfig;
use crate::CommonArgs;

pub fn run(args: &CommonArgs, finetune_from: Option<PathBuf>) -> Result<Outcome> {
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply_overrides(args.seed, args.out.clone(), finetune_from);
    let manifest_path = config.manifest_path()?;
    let (manifest, base) = load_manifest(&manifest_path)?;
    let fold = if manifest.num_folds.is_some() {
        config.train.fold
    } else {
        None
    };
    let subset = config.model.input_channels;
    let train_set = load_split(&manifest, &base, Split::Train, fold, subset)?;
    let val_set = load_split(&manifest, &base, Split::Val, fold, subset)?;
    println!(
        "training on {} clips (val {}), T = {} frames",
        train_set.len(),
        val_set.len(),
        train_set.num_frames
    );

    let mut model_cfg = config.model.clone();
    model_cfg.init_seed = derive_seed(config.seed, 0x111);
    let mut train_cfg = config.train.train.clone();
    train_cfg.seed = derive_seed(config.seed, 0x222);
    train_cfg.finetune_from = config.train.train.finetune_from.clone();

    let run_dir = config.out_dir.join("train");
    let outcome = train(&train_set, &val_set, &model_cfg, &train_cfg, &run_dir)
        .context("training failed")?;
    let last = outcome.log.last().expect("at least the pre-training row");
    println!(
        "best val MSE {:.4} (checkpoint {}); final epoch {}: val L1 {:.3} m",
        outcome.best_val_mse,
        outcome.checkpoint_path.display(),
        last.epoch,
        last.val_l1
    );
    if outcome.diverged {
        eprintln!("warning: training diverged; kept the last good checkpoint");
    }
    write_run_summary(
        &config.out_dir,
        &RunSummary {
            command: "train",
            config_hash: config_hash(&config.train.train),
            outputs: vec![
                outcome.checkpoint_path.display().to_string(),
                run_dir.join("train_log.csv").display().to_string(),
            ],
            notes: if outcome.diverged {
                vec!["diverged".into()]
            } else {
                Vec::new()
            },
        },
    )?;
    Ok(Outcome::Success)
}
