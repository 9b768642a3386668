use std::path::PathBuf;

use anyhow::{Context, Result};

use sde_core::evaluation::{
    drr_stratified_errors, render_report_csv, render_report_text, stratified_errors,
    write_prediction_dump, BinSpec, PredictionRecord,
};
use sde_core::model::load_checkpoint;
use sde_core::scenegen::Split;
use sde_core::training::load_split;

use super::{
    evaluate_model, load_manifest, write_curve_csv, write_run_summary, Outcome, RunSummary,
};
use crate::config::ExperimentConfig;
use crate::CommonArgs;

pub fn run(args: &CommonArgs, checkpoint: Option<PathBuf>) -> Result<Outcome> {
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply_overrides(args.seed, args.out.clone(), None);
    let ckpt_path = checkpoint
        .or_else(|| config.eval.checkpoint.clone())
        .unwrap_or_else(|| config.out_dir.join("train/best.ckpt"));
    let (mut model, meta) = load_checkpoint(&ckpt_path)
        .with_context(|| format!("cannot load checkpoint {}", ckpt_path.display()))?;

    let manifest_path = config.manifest_path()?;
    let (manifest, base) = load_manifest(&manifest_path)?;
    let fold = if manifest.num_folds.is_some() {
        config.train.fold
    } else {
        None
    };
    let test_set = load_split(
        &manifest,
        &base,
        Split::Test,
        fold,
        meta.model_config.input_channels,
    )?;

    let bins = BinSpec::new(config.eval.bins.clone())?;
    let (records, report) = evaluate_model(
        &mut model,
        &test_set,
        &bins,
        config.eval.ci_mode,
        config.train.train.batch_size,
    )?;

    let eval_dir = config.out_dir.join("eval");
    std::fs::create_dir_all(&eval_dir)?;
    write_prediction_dump(&eval_dir.join("predictions.jsonl"), &records)?;
    std::fs::write(eval_dir.join("report.csv"), render_report_csv(&report))?;
    let text = render_report_text(&report);
    std::fs::write(eval_dir.join("report.txt"), &text)?;

    // Plot data: error vs distance, vs DRR, and vs SNR when present.
    let pairs: Vec<_> = records.iter().map(PredictionRecord::to_pair).collect();
    write_curve_csv(
        &eval_dir.join("error_vs_distance.csv"),
        &stratified_errors(&pairs, config.eval.distance_bin_width_m, |p| Some(p.y)),
    )?;
    if pairs.iter().any(|p| p.drr_db.is_some()) {
        write_curve_csv(
            &eval_dir.join("error_vs_drr.csv"),
            &drr_stratified_errors(&pairs, config.eval.drr_bin_width_db)?,
        )?;
    }
    if pairs.iter().any(|p| p.snr_db.is_some()) {
        write_curve_csv(
            &eval_dir.join("error_vs_snr.csv"),
            &stratified_errors(&pairs, 1.0, |p| p.snr_db),
        )?;
    }

    println!("{text}");
    println!("average L1 {:.3} m over {} clips", report.average_l1(), records.len());
    write_run_summary(
        &config.out_dir,
        &RunSummary {
            command: "eval",
            config_hash: manifest.config_hash.clone(),
            outputs: vec![
                eval_dir.join("report.csv").display().to_string(),
                eval_dir.join("predictions.jsonl").display().to_string(),
            ],
            notes: Vec::new(),
        },
    )?;
    Ok(Outcome::Success)
}
