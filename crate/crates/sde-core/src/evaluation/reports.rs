//! Report serialization: prediction dumps (JSON-lines), machine-readable CSV
//! reports that parse back losslessly, and aligned text tables.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{BinnedMetric, CiMode, EvalPair, EvalReport, MeanCi};
use crate::error::{Error, Result};

/// One evaluated clip as persisted in a prediction dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub clip_id: String,
    pub y: f64,
    pub yhat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drr_db: Option<f64>,
    /// Optional path to the per-frame prediction series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub framewise_path: Option<String>,
}

impl PredictionRecord {
    pub fn to_pair(&self) -> EvalPair {
        EvalPair {
            y: self.y,
            yhat: self.yhat,
            fold: self.fold,
            snr_db: self.snr_db,
            drr_db: self.drr_db,
        }
    }
}

pub fn write_prediction_dump(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_prediction_dump(path: &Path) -> Result<Vec<PredictionRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

fn ci_mode_tag(mode: CiMode) -> &'static str {
    match mode {
        CiMode::PerFold => "per_fold",
        CiMode::PerSample => "per_sample",
    }
}

fn parse_ci_mode(tag: &str) -> Result<CiMode> {
    match tag {
        "per_fold" => Ok(CiMode::PerFold),
        "per_sample" => Ok(CiMode::PerSample),
        other => Err(Error::InvalidInput(format!("unknown ci mode {other}"))),
    }
}

/// CSV rendering. Floats use Rust's shortest round-trip formatting, so
/// `parse_report_csv(render_report_csv(r)) == r` exactly.
pub fn render_report_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "ci_mode",
        "row",
        "count",
        "l1_mean",
        "l1_ci95",
        "l1_degenerate",
        "rl1_mean",
        "rl1_ci95",
        "rl1_degenerate",
    ])
    .expect("in-memory write");
    let mut push_row = |m: &BinnedMetric| {
        w.write_record([
            ci_mode_tag(report.ci_mode).to_string(),
            m.label.clone(),
            m.count.to_string(),
            m.l1.mean.to_string(),
            m.l1.ci95.to_string(),
            m.l1.degenerate.to_string(),
            m.rl1.mean.to_string(),
            m.rl1.ci95.to_string(),
            m.rl1.degenerate.to_string(),
        ])
        .expect("in-memory write");
    };
    push_row(&report.average);
    for b in &report.bins {
        push_row(b);
    }
    if let Some(o) = &report.other {
        push_row(o);
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

pub fn parse_report_csv(text: &str) -> Result<EvalReport> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut ci_mode = None;
    let mut rows: Vec<BinnedMetric> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::InvalidInput(format!("bad report row: {e}")))?;
        if record.len() != 9 {
            return Err(Error::InvalidInput(format!(
                "report row has {} fields, expected 9",
                record.len()
            )));
        }
        ci_mode = Some(parse_ci_mode(&record[0])?);
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad float {s}")))
        };
        let parse_b = |s: &str| -> Result<bool> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad bool {s}")))
        };
        rows.push(BinnedMetric {
            label: record[1].to_string(),
            count: record[2]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad count {}", &record[2])))?,
            l1: MeanCi {
                mean: parse_f(&record[3])?,
                ci95: parse_f(&record[4])?,
                degenerate: parse_b(&record[5])?,
            },
            rl1: MeanCi {
                mean: parse_f(&record[6])?,
                ci95: parse_f(&record[7])?,
                degenerate: parse_b(&record[8])?,
            },
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("report csv has no rows".into()));
    }
    let average = rows.remove(0);
    let other = match rows.last() {
        Some(m) if m.label == super::metrics::OTHER_BIN_LABEL => rows.pop(),
        _ => None,
    };
    Ok(EvalReport {
        ci_mode: ci_mode.unwrap(),
        average,
        bins: rows,
        other,
    })
}

/// Human-readable aligned table: one column per bin, L1 and rL1 rows.
pub fn render_report_text(report: &EvalReport) -> String {
    let mut columns: Vec<&BinnedMetric> = vec![&report.average];
    columns.extend(report.bins.iter());
    if let Some(o) = &report.other {
        columns.push(o);
    }
    let fmt = |m: &MeanCi| format!("{:.2} +- {:.2}", m.mean, m.ci95);
    let width = columns
        .iter()
        .map(|c| c.label.len().max(fmt(&c.l1).len()).max(fmt(&c.rl1).len()))
        .map(|w| w + 2)
        .collect::<Vec<_>>();
    let mut out = String::new();
    out.push_str(&format!("{:8}", ""));
    for (c, w) in columns.iter().zip(&width) {
        out.push_str(&format!("{:>w$}", c.label, w = w));
    }
    out.push('\n');
    out.push_str(&format!("{:8}", "n"));
    for (c, w) in columns.iter().zip(&width) {
        out.push_str(&format!("{:>w$}", c.count, w = w));
    }
    out.push('\n');
    out.push_str(&format!("{:8}", "L1"));
    for (c, w) in columns.iter().zip(&width) {
        out.push_str(&format!("{:>w$}", fmt(&c.l1), w = w));
    }
    out.push('\n');
    out.push_str(&format!("{:8}", "rL1"));
    for (c, w) in columns.iter().zip(&width) {
        out.push_str(&format!("{:>w$}", fmt(&c.rl1), w = w));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::metrics::{binned_report, BinSpec};

    fn sample_report() -> EvalReport {
        let mut pairs = Vec::new();
        let mut rng = crate::rng::stream_rng(4, 0);
        use rand::Rng;
        for _ in 0..200 {
            pairs.push(EvalPair::new(
                rng.gen_range(1.0..16.0),
                rng.gen_range(0.5..15.0),
            ));
        }
        binned_report(&pairs, &BinSpec::synthetic_default(), CiMode::PerSample).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let report = sample_report();
        let rendered = render_report_csv(&report);
        let parsed = parse_report_csv(&rendered).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.jsonl");
        let records = vec![
            PredictionRecord {
                clip_id: "a".into(),
                y: 2.0,
                yhat: 2.5,
                fold: Some(1),
                snr_db: Some(10.0),
                drr_db: None,
                framewise_path: None,
            },
            PredictionRecord {
                clip_id: "b".into(),
                y: 4.0,
                yhat: 3.0,
                fold: None,
                snr_db: None,
                drr_db: Some(-2.5),
                framewise_path: Some("frames/b.csv".into()),
            },
        ];
        write_prediction_dump(&path, &records).unwrap();
        let back = read_prediction_dump(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn replayed_dump_reproduces_live_report_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.jsonl");
        let mut rng = crate::rng::stream_rng(5, 0);
        use rand::Rng;
        let records: Vec<PredictionRecord> = (0..300)
            .map(|i| PredictionRecord {
                clip_id: format!("c{i}"),
                y: rng.gen_range(1.0..14.0),
                yhat: rng.gen_range(0.5..15.0),
                fold: Some(i % 5),
                snr_db: None,
                drr_db: Some(rng.gen_range(-10.0..10.0)),
                framewise_path: None,
            })
            .collect();
        let live_pairs: Vec<EvalPair> = records.iter().map(PredictionRecord::to_pair).collect();
        let live = binned_report(&live_pairs, &BinSpec::synthetic_default(), CiMode::PerFold)
            .unwrap();
        write_prediction_dump(&path, &records).unwrap();
        let replayed = read_prediction_dump(&path).unwrap();
        let replay_pairs: Vec<EvalPair> =
            replayed.iter().map(PredictionRecord::to_pair).collect();
        let replay = binned_report(&replay_pairs, &BinSpec::synthetic_default(), CiMode::PerFold)
            .unwrap();
        assert_eq!(replay, live);
    }

    #[test]
    fn text_table_mentions_every_bin() {
        let report = sample_report();
        let text = render_report_text(&report);
        assert!(text.contains("average"));
        assert!(text.contains("[1,2)"));
        assert!(text.contains("[8,14)"));
        assert!(text.contains("L1"));
        assert!(text.contains("rL1"));
    }
}
