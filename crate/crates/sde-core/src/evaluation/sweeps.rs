//! Sweep and grid tables: noise sweeps keyed by SNR and feature set,
//! cross-corpus matrices, ablation grids, and DRR-stratified error curves.
//!
//! These shape evaluated prediction sets into the experiment tables; running
//! the underlying training jobs is the caller's concern (see the CLI crate).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{binned_report, BinSpec, CiMode, EvalPair, EvalReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub row: String,
    pub col: String,
    pub report: EvalReport,
}

/// A labeled grid of evaluation reports; cells may be absent when the
/// corresponding run failed or its inputs were missing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridTable {
    pub row_label: String,
    pub col_label: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<GridCell>,
}

impl GridTable {
    pub fn cell(&self, row: &str, col: &str) -> Option<&EvalReport> {
        self.cells
            .iter()
            .find(|c| c.row == row && c.col == col)
            .map(|c| &c.report)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
}

/// Build the SNR x feature-set table from evaluated cells.
pub fn snr_sweep_report(
    cells: Vec<(f64, String, Vec<EvalPair>)>,
    bins: &BinSpec,
    ci_mode: CiMode,
) -> Result<GridTable> {
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut out = Vec::new();
    for (snr, feature_set, pairs) in cells {
        let row = format!("{snr} dB");
        if !rows.contains(&row) {
            rows.push(row.clone());
        }
        if !cols.contains(&feature_set) {
            cols.push(feature_set.clone());
        }
        if pairs.is_empty() {
            continue;
        }
        let report = binned_report(&pairs, bins, ci_mode)?;
        out.push(GridCell {
            row,
            col: feature_set,
            report,
        });
    }
    Ok(GridTable {
        row_label: "snr".into(),
        col_label: "feature_set".into(),
        rows,
        cols,
        cells: out,
    })
}

/// One evaluated architecture row of an ablation grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub kernel_shape: String,
    pub num_recurrent_layers: usize,
    pub attention_mode: String,
    pub feature_set: String,
    pub parameter_count: usize,
    /// Absent when the run failed; the failure text is kept instead.
    pub report: Option<EvalReport>,
    pub failure: Option<String>,
}

/// Assemble evaluated ablation rows into a table, preserving row order.
pub fn ablation_grid_report(rows: Vec<AblationRow>) -> Vec<AblationRow> {
    rows
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCell {
    pub train: String,
    pub test: String,
    pub average_l1: f64,
}

/// Average-L1 matrix over (train corpus, test corpus); absent cells are
/// missing pairings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCorpusMatrix {
    pub corpora: Vec<String>,
    pub finetuned: bool,
    pub cells: Vec<CrossCell>,
}

impl CrossCorpusMatrix {
    pub fn get(&self, train: &str, test: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.train == train && c.test == test)
            .map(|c| c.average_l1)
    }
}

pub fn cross_corpus_matrix_report(
    corpora: Vec<String>,
    finetuned: bool,
    cells: Vec<(String, String, f64)>,
) -> CrossCorpusMatrix {
    CrossCorpusMatrix {
        corpora,
        finetuned,
        cells: cells
            .into_iter()
            .map(|(train, test, average_l1)| CrossCell {
                train,
                test,
                average_l1,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Bin center on the stratification axis.
    pub x: f64,
    /// Mean L1 within the bin.
    pub y: f64,
    pub count: usize,
}

/// Mean L1 per DRR bin of the given width. Pairs without DRR metadata are an
/// error when none carry it at all.
pub fn drr_stratified_errors(pairs: &[EvalPair], bin_width_db: f64) -> Result<Vec<CurvePoint>> {
    if !(bin_width_db > 0.0) {
        return Err(Error::InvalidConfig("bin width must be positive".into()));
    }
    let with_drr: Vec<&EvalPair> = pairs.iter().filter(|p| p.drr_db.is_some()).collect();
    if with_drr.is_empty() {
        return Err(Error::InvalidInput(
            "no evaluation pairs carry DRR metadata".into(),
        ));
    }
    let mut groups: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for p in with_drr {
        let drr = p.drr_db.unwrap();
        let idx = (drr / bin_width_db).floor() as i64;
        let entry = groups.entry(idx).or_insert((0.0, 0));
        entry.0 += super::metrics::l1(p.y, p.yhat);
        entry.1 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|(idx, (sum, count))| CurvePoint {
            x: (idx as f64 + 0.5) * bin_width_db,
            y: sum / count as f64,
            count,
        })
        .collect())
}

/// Generic stratified error curve over an arbitrary metadata axis (used for
/// the error-vs-distance and error-vs-SNR plot data).
pub fn stratified_errors<F>(pairs: &[EvalPair], bin_width: f64, axis: F) -> Vec<CurvePoint>
where
    F: Fn(&EvalPair) -> Option<f64>,
{
    let mut groups: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for p in pairs {
        if let Some(v) = axis(p) {
            let idx = (v / bin_width).floor() as i64;
            let entry = groups.entry(idx).or_insert((0.0, 0));
            entry.0 += super::metrics::l1(p.y, p.yhat);
            entry.1 += 1;
        }
    }
    groups
        .into_iter()
        .map(|(idx, (sum, count))| CurvePoint {
            x: (idx as f64 + 0.5) * bin_width,
            y: sum / count as f64,
            count,
        })
        .collect()
}
