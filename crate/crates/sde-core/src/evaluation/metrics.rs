//! Absolute and relative distance errors, aggregated per distance bin with
//! 95% confidence intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OTHER_BIN_LABEL: &str = "other";

/// Absolute error |y - yhat| in meters.
pub fn l1(y: f64, yhat: f64) -> f64 {
    (y - yhat).abs()
}

/// Relative absolute error |y - yhat| / y; requires y > 0.
pub fn rl1(y: f64, yhat: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::InvalidInput(format!(
            "relative error needs a positive true distance, got {y}"
        )));
    }
    Ok(l1(y, yhat) / y)
}

/// Ordered, non-overlapping half-open distance intervals [a, b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub edges: Vec<(f64, f64)>,
}

impl BinSpec {
    pub fn new(edges: Vec<(f64, f64)>) -> Result<Self> {
        let spec = BinSpec { edges };
        spec.validate()?;
        Ok(spec)
    }

    /// The synthetic-dataset bins {[1,2), [2,4), [4,8), [8,14)}.
    pub fn synthetic_default() -> Self {
        BinSpec {
            edges: vec![(1.0, 2.0), (2.0, 4.0), (4.0, 8.0), (8.0, 14.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.is_empty() {
            return Err(Error::InvalidConfig("bin spec has no intervals".into()));
        }
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if !(a < b) {
                return Err(Error::InvalidConfig(format!(
                    "bin {i} [{a}, {b}) is empty or reversed"
                )));
            }
            if i > 0 && self.edges[i - 1].1 > a {
                return Err(Error::InvalidConfig(format!(
                    "bin {i} overlaps or is out of order"
                )));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, y: f64) -> Option<usize> {
        self.edges.iter().position(|&(a, b)| y >= a && y < b)
    }

    pub fn label(&self, idx: usize) -> String {
        let (a, b) = self.edges[idx];
        format!("[{a},{b})")
    }
}

/// One evaluated sample: truth, prediction, and stratification metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub y: f64,
    pub yhat: f64,
    /// Fold the sample was tested in, for per-fold confidence intervals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drr_db: Option<f64>,
}

impl EvalPair {
    pub fn new(y: f64, yhat: f64) -> Self {
        EvalPair {
            y,
            yhat,
            fold: None,
            snr_db: None,
            drr_db: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMode {
    /// t-interval over fold means (cross-validated datasets).
    PerFold,
    /// Normal approximation over per-sample errors (single-split corpora).
    PerSample,
}

/// Mean with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub ci95: f64,
    /// Set when the CI is degenerate (a single fold or sample).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedMetric {
    pub label: String,
    pub count: usize,
    pub l1: MeanCi,
    pub rl1: MeanCi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ci_mode: CiMode,
    pub average: BinnedMetric,
    pub bins: Vec<BinnedMetric>,
    /// Samples whose true distance fell outside every declared bin.
    pub other: Option<BinnedMetric>,
}

impl EvalReport {
    pub fn average_l1(&self) -> f64 {
        self.average.l1.mean
    }
}

/// Two-sided 97.5% Student-t quantile for `df` degrees of freedom.
fn t_critical(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        f64::NAN
    } else if df <= TABLE.len() {
        TABLE[df - 1]
    } else {
        1.96
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (ddof = 1).
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn mean_ci(errors: &[f64], folds: &[Option<usize>], mode: CiMode) -> MeanCi {
    let overall = mean(errors);
    match mode {
        CiMode::PerSample => {
            if errors.len() < 2 {
                return MeanCi {
                    mean: overall,
                    ci95: 0.0,
                    degenerate: true,
                };
            }
            let half = 1.96 * std_dev(errors) / (errors.len() as f64).sqrt();
            MeanCi {
                mean: overall,
                ci95: half,
                degenerate: false,
            }
        }
        CiMode::PerFold => {
            let mut fold_ids: Vec<usize> = folds.iter().flatten().cloned().collect();
            fold_ids.sort_unstable();
            fold_ids.dedup();
            if fold_ids.len() < 2 {
                return MeanCi {
                    mean: overall,
                    ci95: 0.0,
                    degenerate: true,
                };
            }
            let fold_means: Vec<f64> = fold_ids
                .iter()
                .map(|&f| {
                    let vals: Vec<f64> = errors
                        .iter()
                        .zip(folds)
                        .filter(|(_, ff)| **ff == Some(f))
                        .map(|(e, _)| *e)
                        .collect();
                    mean(&vals)
                })
                .collect();
            let k = fold_means.len();
            let half = t_critical(k - 1) * std_dev(&fold_means) / (k as f64).sqrt();
            MeanCi {
                mean: overall,
                ci95: half,
                degenerate: false,
            }
        }
    }
}

fn aggregate(pairs: &[&EvalPair], label: &str, mode: CiMode) -> Result<BinnedMetric> {
    let l1s: Vec<f64> = pairs.iter().map(|p| l1(p.y, p.yhat)).collect();
    let rl1s: Vec<f64> = pairs
        .iter()
        .map(|p| rl1(p.y, p.yhat))
        .collect::<Result<_>>()?;
    let folds: Vec<Option<usize>> = pairs.iter().map(|p| p.fold).collect();
    Ok(BinnedMetric {
        label: label.to_string(),
        count: pairs.len(),
        l1: mean_ci(&l1s, &folds, mode),
        rl1: mean_ci(&rl1s, &folds, mode),
    })
}

/// Per-bin and overall mean L1/rL1 with 95% confidence intervals. Samples
/// outside every bin are reported under an "other" row, never dropped.
pub fn binned_report(pairs: &[EvalPair], bins: &BinSpec, ci_mode: CiMode) -> Result<EvalReport> {
    bins.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no evaluation pairs".into()));
    }
    let average = aggregate(&pairs.iter().collect::<Vec<_>>(), "average", ci_mode)?;
    let mut bin_rows = Vec::with_capacity(bins.edges.len());
    for idx in 0..bins.edges.len() {
        let members: Vec<&EvalPair> = pairs
            .iter()
            .filter(|p| bins.index_of(p.y) == Some(idx))
            .collect();
        if members.is_empty() {
            // Absent, not zero.
            continue;
        }
        bin_rows.push(aggregate(&members, &bins.label(idx), ci_mode)?);
    }
    let outside: Vec<&EvalPair> = pairs
        .iter()
        .filter(|p| bins.index_of(p.y).is_none())
        .collect();
    let other = if outside.is_empty() {
        None
    } else {
        Some(aggregate(&outside, OTHER_BIN_LABEL, ci_mode)?)
    };
    Ok(EvalReport {
        ci_mode,
        average,
        bins: bin_rows,
        other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_reference_values() {
        assert_eq!(l1(2.0, 2.5), 0.5);
        assert_eq!(rl1(2.0, 2.5).unwrap(), 0.25);
        assert_eq!(l1(3.0, 3.0), 0.0);
        assert_eq!(rl1(3.0, 3.0).unwrap(), 0.0);
        assert!(rl1(0.0, 1.0).is_err());
        assert!(rl1(-1.0, 1.0).is_err());
    }

    #[test]
    fn metric_symmetry_and_scale_invariance() {
        let mut rng = crate::rng::stream_rng(8, 0);
        use rand::Rng;
        for _ in 0..100 {
            let y: f64 = rng.gen_range(0.5..10.0);
            let yhat: f64 = rng.gen_range(0.5..10.0);
            let k: f64 = rng.gen_range(0.1..5.0);
            assert!((l1(y, yhat) - l1(yhat, y)).abs() < 1e-15);
            let a = rl1(y, yhat).unwrap();
            let b = rl1(k * y, k * yhat).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_pair_example() {
        let pairs = vec![EvalPair::new(1.5, 1.5), EvalPair::new(3.0, 4.0)];
        let report = binned_report(&pairs, &BinSpec::synthetic_default(), CiMode::PerSample).unwrap();
        assert_eq!(report.average.l1.mean, 0.5);
        assert_eq!(report.bins.len(), 2);
        assert_eq!(report.bins[0].l1.mean, 0.0);
        assert_eq!(report.bins[1].l1.mean, 1.0);
        assert!(report.other.is_none());
    }

    #[test]
    fn degenerate_ci_is_flagged() {
        let pairs = vec![EvalPair {
            y: 1.5,
            yhat: 1.7,
            fold: Some(0),
            snr_db: None,
            drr_db: None,
        }];
        let report = binned_report(&pairs, &BinSpec::synthetic_default(), CiMode::PerFold).unwrap();
        assert!(report.average.l1.degenerate);
        assert_eq!(report.average.l1.ci95, 0.0);
    }

    #[test]
    fn out_of_bin_samples_go_to_other() {
        let pairs = vec![EvalPair::new(1.5, 1.5), EvalPair::new(20.0, 21.0)];
        let report = binned_report(&pairs, &BinSpec::synthetic_default(), CiMode::PerSample).unwrap();
        let other = report.other.unwrap();
        assert_eq!(other.count, 1);
        assert_eq!(other.l1.mean, 1.0);
    }

    #[test]
    fn aggregation_consistency() {
        let mut rng = crate::rng::stream_rng(9, 0);
        use rand::Rng;
        let pairs: Vec<EvalPair> = (0..500)
            .map(|_| EvalPair::new(rng.gen_range(1.0..14.0), rng.gen_range(0.5..15.0)))
            .collect();
        let bins = BinSpec::synthetic_default();
        let report = binned_report(&pairs, &bins, CiMode::PerSample).unwrap();
        let weighted: f64 = report
            .bins
            .iter()
            .chain(report.other.iter())
            .map(|b| b.count as f64 * b.l1.mean)
            .sum();
        let overall = report.average.count as f64 * report.average.l1.mean;
        assert!((weighted - overall).abs() < 1e-9);
    }

    #[test]
    fn per_fold_ci_uses_t_quantile() {
        // 5 folds with distinct means; check against a hand computation.
        let mut pairs = Vec::new();
        for f in 0..5 {
            for _ in 0..10 {
                pairs.push(EvalPair {
                    y: 2.0,
                    yhat: 2.0 + 0.1 * (f as f64 + 1.0),
                    fold: Some(f),
                    snr_db: None,
                    drr_db: None,
                });
            }
        }
        let report = binned_report(&pairs, &BinSpec::synthetic_default(), CiMode::PerFold).unwrap();
        // Fold means are 0.1..0.5; sd = sqrt(0.025) ~ 0.1581, t_4 = 2.776.
        let expect = 2.776 * 0.158113883 / 5f64.sqrt();
        assert!((report.average.l1.ci95 - expect).abs() < 1e-6);
        assert!((report.average.l1.mean - 0.3).abs() < 1e-12);
    }

    #[test]
    fn invalid_bins_rejected() {
        assert!(BinSpec::new(vec![(2.0, 1.0)]).is_err());
        assert!(BinSpec::new(vec![(1.0, 3.0), (2.0, 4.0)]).is_err());
        assert!(BinSpec::new(vec![]).is_err());
    }
}
