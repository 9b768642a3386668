//! Dataset summaries: distance histograms, RT60 percentiles, split sizes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::manifest::{Assignment, DatasetManifest};
use crate::evaluation::BinSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_entries: usize,
    /// Entries per split label ("train"/"val"/"test") or fold chunk ("fold0"...).
    pub group_sizes: BTreeMap<String, usize>,
    /// (bin label, count) per declared bin, plus "other" when applicable.
    pub distance_histogram: Vec<(String, usize)>,
    pub distance_min_max: Option<(f64, f64)>,
    /// 10th/50th/90th percentiles over entries that carry an RT60.
    pub rt60_percentiles: Option<[f64; 3]>,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((sorted.len() as f64 * p) as usize).min(sorted.len() - 1);
    sorted[idx]
}

pub fn dataset_stats(manifest: &DatasetManifest, bins: &BinSpec) -> DatasetStats {
    let mut group_sizes: BTreeMap<String, usize> = BTreeMap::new();
    for e in &manifest.entries {
        let key = match e.assignment {
            Assignment::Split(s) => format!("{s:?}").to_lowercase(),
            Assignment::Fold { fold } => format!("fold{fold}"),
        };
        *group_sizes.entry(key).or_insert(0) += 1;
    }

    let mut counts = vec![0usize; bins.edges.len()];
    let mut other = 0usize;
    for e in &manifest.entries {
        match bins.index_of(e.distance_m) {
            Some(i) => counts[i] += 1,
            None => other += 1,
        }
    }
    let mut distance_histogram: Vec<(String, usize)> = counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (bins.label(i), c))
        .collect();
    if other > 0 {
        distance_histogram.push(("other".into(), other));
    }

    let distance_min_max = manifest
        .entries
        .iter()
        .map(|e| e.distance_m)
        .fold(None, |acc: Option<(f64, f64)>, d| match acc {
            None => Some((d, d)),
            Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
        });

    let mut rts: Vec<f64> = manifest.entries.iter().filter_map(|e| e.rt60_s).collect();
    let rt60_percentiles = if rts.is_empty() {
        None
    } else {
        rts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some([
            percentile(&rts, 0.10),
            percentile(&rts, 0.50),
            percentile(&rts, 0.90),
        ])
    };

    DatasetStats {
        num_entries: manifest.entries.len(),
        group_sizes,
        distance_histogram,
        distance_min_max,
        rt60_percentiles,
    }
}
