//! Subcommand implementations and shared plumbing.

pub mod ablate;
pub mod crosscorpus;
pub mod eval;
pub mod generate;
pub mod inspect;
pub mod stats;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use sde_core::evaluation::{binned_report, BinSpec, CiMode, EvalPair, EvalReport, PredictionRecord};
use sde_core::model::Model;
use sde_core::scenegen::{read_manifest, DatasetManifest, Split};
use sde_core::training::{load_split, predict_dataset, LoadedDataset};

/// Grid commands succeed partially; everything else is success or an error.
pub enum Outcome {
    Success,
    PartialFailure,
}

/// Machine-readable record of what a command produced.
#[derive(Serialize)]
pub struct RunSummary<'a> {
    pub command: &'a str,
    pub config_hash: String,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

pub fn write_run_summary(out_dir: &Path, summary: &RunSummary) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let path = out_dir.join(format!("run_summary_{}.json", summary.command));
    std::fs::write(&path, serde_json::to_vec_pretty(summary)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<(DatasetManifest, PathBuf)> {
    let manifest = read_manifest(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((manifest, base))
}

pub fn load_three_splits(
    manifest: &DatasetManifest,
    base: &Path,
    fold: Option<usize>,
    subset: sde_core::features::ChannelSubset,
) -> Result<(LoadedDataset, LoadedDataset, LoadedDataset)> {
    let train = load_split(manifest, base, Split::Train, fold, subset)?;
    let val = load_split(manifest, base, Split::Val, fold, subset)?;
    let test = load_split(manifest, base, Split::Test, fold, subset)?;
    Ok((train, val, test))
}

/// Inference over a loaded split plus the binned report.
pub fn evaluate_model(
    model: &mut Model,
    data: &LoadedDataset,
    bins: &BinSpec,
    ci_mode: CiMode,
    batch_size: usize,
) -> Result<(Vec<PredictionRecord>, EvalReport)> {
    let records = predict_dataset(model, data, batch_size)?;
    let pairs: Vec<EvalPair> = records.iter().map(PredictionRecord::to_pair).collect();
    let report = binned_report(&pairs, bins, ci_mode)?;
    Ok((records, report))
}

/// Write (x, y, count) plot-data CSV.
pub fn write_curve_csv(path: &Path, points: &[sde_core::evaluation::CurvePoint]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = String::from("x,y,count\n");
    for p in points {
        text.push_str(&format!("{},{},{}\n", p.x, p.y, p.count));
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Write a T x F matrix as CSV rows.
pub fn write_matrix_csv(path: &Path, matrix: ndarray::ArrayView2<f64>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = String::new();
    for row in matrix.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
