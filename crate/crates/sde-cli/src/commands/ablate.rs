use anyhow::{Context, Result};

use sde_core::evaluation::{AblationRow, BinSpec};
use sde_core::model::{load_checkpoint, Model};
use sde_core::rng::derive_seed;
use sde_core::scenegen::config_hash;
use sde_core::training::train;

use super::{
    evaluate_model, load_manifest, load_three_splits, write_run_summary, Outcome, RunSummary,
};
use crate::config::ExperimentConfig;
use crate::CommonArgs;

/// Train and evaluate every architecture row under identical seeds and
/// splits. Individual failures are recorded per row and the grid continues.
pub fn run(args: &CommonArgs) -> Result<Outcome> {
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply_overrides(args.seed, args.out.clone(), None);
    let grid = config
        .ablate
        .as_ref()
        .context("ablate requires an ablate.grid section")?
        .grid
        .clone();
    if grid.is_empty() {
        println!("empty grid; nothing to run");
        return Ok(Outcome::Success);
    }
    let manifest_path = config.manifest_path()?;
    let (manifest, base) = load_manifest(&manifest_path)?;
    let fold = if manifest.num_folds.is_some() {
        config.train.fold
    } else {
        None
    };
    let bins = BinSpec::new(config.eval.bins.clone())?;

    let mut rows: Vec<AblationRow> = Vec::with_capacity(grid.len());
    let mut any_failed = false;
    for row_spec in &grid {
        let label = row_spec.label();
        let run = || -> Result<AblationRow> {
            let mut model_cfg = row_spec.apply(&config.model);
            model_cfg.init_seed = derive_seed(config.seed, 0x111);
            let mut train_cfg = config.train.train.clone();
            train_cfg.seed = derive_seed(config.seed, 0x222);
            let subset = model_cfg.input_channels;
            let (train_set, val_set, test_set) =
                load_three_splits(&manifest, &base, fold, subset)?;
            let run_dir = config.out_dir.join("ablate").join(&label);
            let outcome = train(&train_set, &val_set, &model_cfg, &train_cfg, &run_dir)?;
            let (mut model, _) = load_checkpoint(&outcome.checkpoint_path)?;
            let params = model.num_params();
            let (_, report) = evaluate_model(
                &mut model,
                &test_set,
                &bins,
                config.eval.ci_mode,
                train_cfg.batch_size,
            )?;
            let _: &Model = &model;
            Ok(AblationRow {
                label: label.clone(),
                kernel_shape: format!("{:?}", row_spec.kernel_shape).to_lowercase(),
                num_recurrent_layers: row_spec.num_recurrent_layers,
                attention_mode: format!("{:?}", row_spec.attention_mode).to_lowercase(),
                feature_set: format!("{:?}", row_spec.input_channels).to_lowercase(),
                parameter_count: params,
                report: Some(report),
                failure: None,
            })
        };
        match run() {
            Ok(row) => {
                let l1 = row.report.as_ref().map(|r| r.average_l1()).unwrap_or(f64::NAN);
                println!("{label}: {} params, avg L1 {l1:.3} m", row.parameter_count);
                rows.push(row);
            }
            Err(err) => {
                any_failed = true;
                eprintln!("{label}: failed: {err:#}");
                rows.push(AblationRow {
                    label: label.clone(),
                    kernel_shape: format!("{:?}", row_spec.kernel_shape).to_lowercase(),
                    num_recurrent_layers: row_spec.num_recurrent_layers,
                    attention_mode: format!("{:?}", row_spec.attention_mode).to_lowercase(),
                    feature_set: format!("{:?}", row_spec.input_channels).to_lowercase(),
                    parameter_count: 0,
                    report: None,
                    failure: Some(format!("{err:#}")),
                });
            }
        }
    }

    let table_dir = config.out_dir.join("ablate");
    std::fs::create_dir_all(&table_dir)?;
    std::fs::write(
        table_dir.join("ablation.json"),
        serde_json::to_vec_pretty(&rows)?,
    )?;
    let mut csv = String::from(
        "label,kernel,num_grus,attention,features,params,avg_l1,avg_l1_ci95,avg_rl1,avg_rl1_ci95,failure\n",
    );
    for row in &rows {
        let (l1, l1ci, rl1, rl1ci) = row
            .report
            .as_ref()
            .map(|r| {
                (
                    r.average.l1.mean,
                    r.average.l1.ci95,
                    r.average.rl1.mean,
                    r.average.rl1.ci95,
                )
            })
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            row.label,
            row.kernel_shape,
            row.num_recurrent_layers,
            row.attention_mode,
            row.feature_set,
            row.parameter_count,
            l1,
            l1ci,
            rl1,
            rl1ci,
            row.failure.as_deref().unwrap_or("")
        ));
    }
    std::fs::write(table_dir.join("ablation.csv"), csv)?;
    println!("grid complete: {} rows -> {}", rows.len(), table_dir.join("ablation.csv").display());
    write_run_summary(
        &config.out_dir,
        &RunSummary {
            command: "ablate",
            config_hash: config_hash(&grid.iter().map(|g| g.label()).collect::<Vec<_>>()),
            outputs: vec![table_dir.join("ablation.csv").display().to_string()],
            notes: rows
                .iter()
                .filter_map(|r| r.failure.clone())
                .collect(),
        },
    )?;
    Ok(if any_failed {
        Outcome::PartialFailure
    } else {
        Outcome::Success
    })
}
