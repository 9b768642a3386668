use std::collections::BTreeMap;

use anyhow::{Context, Result};

use sde_core::evaluation::{cross_corpus_matrix_report, BinSpec};
use sde_core::model::load_checkpoint;
use sde_core::rng::derive_seed;
use sde_core::scenegen::config_hash;
use sde_core::training::train;

use super::{
    evaluate_model, load_manifest, load_three_splits, write_run_summary, Outcome, RunSummary,
};
use crate::config::ExperimentConfig;
use crate::CommonArgs;

/// Train one model per corpus, then fill the (train corpus, test corpus)
/// average-L1 matrix. Without fine-tuning, source checkpoints are evaluated
/// directly on the target test split; with it, they are first re-trained on
/// the target's train split. Failed cells are reported and left absent.
pub fn run(args: &CommonArgs, finetune: bool) -> Result<Outcome> {
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply_overrides(args.seed, args.out.clone(), None);
    let section = config
        .crosscorpus
        .as_ref()
        .context("crosscorpus requires a crosscorpus.corpora section")?;
    let finetune = finetune || section.finetune;
    let corpora = section.corpora.clone();
    if corpora.is_empty() {
        println!("no corpora configured; nothing to run");
        return Ok(Outcome::Success);
    }
    let bins = BinSpec::new(config.eval.bins.clone())?;
    let subset = config.model.input_channels;
    let batch = config.train.train.batch_size;
    let cross_dir = config.out_dir.join("crosscorpus");

    // In-corpus training pass.
    let mut checkpoints = BTreeMap::new();
    let mut any_failed = false;
    for corpus in &corpora {
        let result = || -> Result<std::path::PathBuf> {
            let (manifest, base) = load_manifest(&corpus.manifest)?;
            let fold = if manifest.num_folds.is_some() {
                corpus.fold.or(Some(0))
            } else {
                None
            };
            let (train_set, val_set, _) = load_three_splits(&manifest, &base, fold, subset)?;
            let mut model_cfg = config.model.clone();
            model_cfg.init_seed = derive_seed(config.seed, 0x111);
            let mut train_cfg = config.train.train.clone();
            train_cfg.seed = derive_seed(config.seed, 0x222);
            let run_dir = cross_dir.join(format!("train_{}", corpus.name));
            let outcome = train(&train_set, &val_set, &model_cfg, &train_cfg, &run_dir)?;
            Ok(outcome.checkpoint_path)
        }();
        match result {
            Ok(path) => {
                checkpoints.insert(corpus.name.clone(), path);
            }
            Err(err) => {
                any_failed = true;
                eprintln!("training on {} failed: {err:#}", corpus.name);
            }
        }
    }

    // Evaluation matrix.
    let mut cells = Vec::new();
    for source in &corpora {
        let Some(ckpt) = checkpoints.get(&source.name) else {
            continue;
        };
        for target in &corpora {
            let result = || -> Result<f64> {
                let (manifest, base) = load_manifest(&target.manifest)?;
                let fold = if manifest.num_folds.is_some() {
                    target.fold.or(Some(0))
                } else {
                    None
                };
                let mut model = if finetune && source.name != target.name {
                    let (train_set, val_set, _) =
                        load_three_splits(&manifest, &base, fold, subset)?;
                    let mut train_cfg = config.train.train.clone();
                    train_cfg.seed = derive_seed(config.seed, 0x333);
                    train_cfg.finetune_from = Some(ckpt.clone());
                    let run_dir =
                        cross_dir.join(format!("finetune_{}_on_{}", source.name, target.name));
                    let outcome =
                        train(&train_set, &val_set, &config.model, &train_cfg, &run_dir)?;
                    load_checkpoint(&outcome.checkpoint_path)?.0
                } else {
                    load_checkpoint(ckpt)?.0
                };
                let (_, _, test_set) = load_three_splits(&manifest, &base, fold, subset)?;
                let (_, report) =
                    evaluate_model(&mut model, &test_set, &bins, config.eval.ci_mode, batch)?;
                Ok(report.average_l1())
            }();
            match result {
                Ok(l1) => {
                    println!("train {} -> test {}: L1 {l1:.3} m", source.name, target.name);
                    cells.push((source.name.clone(), target.name.clone(), l1));
                }
                Err(err) => {
                    any_failed = true;
                    eprintln!(
                        "cell train {} -> test {} failed: {err:#}",
                        source.name, target.name
                    );
                }
            }
        }
    }

    let names: Vec<String> = corpora.iter().map(|c| c.name.clone()).collect();
    let matrix = cross_corpus_matrix_report(names.clone(), finetune, cells);
    std::fs::create_dir_all(&cross_dir)?;
    std::fs::write(
        cross_dir.join("matrix.json"),
        serde_json::to_vec_pretty(&matrix)?,
    )?;
    let mut csv = String::from("train\\test");
    for name in &names {
        csv.push_str(&format!(",{name}"));
    }
    csv.push('\n');
    for row in &names {
        csv.push_str(row);
        for col in &names {
            match matrix.get(row, col) {
                Some(v) => csv.push_str(&format!(",{v}")),
                None => csv.push(','),
            }
        }
        csv.push('\n');
    }
    std::fs::write(cross_dir.join("matrix.csv"), &csv)?;
    println!("matrix written to {}", cross_dir.join("matrix.csv").display());
    write_run_summary(
        &config.out_dir,
        &RunSummary {
            command: "crosscorpus",
            config_hash: config_hash(&names),
            outputs: vec![cross_dir.join("matrix.csv").display().to_string()],
            notes: Vec::new(),
        },
    )?;
    Ok(if any_failed {
        Outcome::PartialFailure
    } else {
        Outcome::Success
    })
}
