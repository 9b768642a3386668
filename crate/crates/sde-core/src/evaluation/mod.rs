//! Distance-error metrics and reporting: per-bin L1/rL1 with confidence
//! intervals, stratified curves, sweeps, and experiment grids.

mod metrics;
mod reports;
mod sweeps;

pub use metrics::{
    binned_report, l1, rl1, BinSpec, BinnedMetric, CiMode, EvalPair, EvalReport, OTHER_BIN_LABEL,
};
pub use reports::{
    parse_report_csv, read_prediction_dump, render_report_csv, render_report_text,
    write_prediction_dump, PredictionRecord,
};
pub use sweeps::{
    ablation_grid_report, cross_corpus_matrix_report, drr_stratified_errors, snr_sweep_report,
    stratified_errors, AblationRow, CrossCorpusMatrix, CurvePoint, GridTable,
};
