//! Manifest-backed feature loading: clips are read, transformed to feature
//! stacks, and held in memory as channels-first tensors ready for batching.

use std::path::Path;

use ndarray::{Array3, Array4, Axis};
use rayon::prelude::*;

use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::features::{extract_features, select_channels, ChannelSubset};
use crate::scenegen::{DatasetManifest, Split};

#[derive(Debug, Clone)]
pub struct ClipMeta {
    pub clip_id: String,
    pub distance_m: f64,
    pub fold: Option<usize>,
    pub snr_db: Option<f64>,
    pub drr_db: Option<f64>,
}

pub struct LoadedDataset {
    /// One [C, T, F] stack per clip.
    pub features: Vec<Array3<f64>>,
    pub meta: Vec<ClipMeta>,
    pub num_frames: usize,
    pub subset: ChannelSubset,
}

impl LoadedDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Stack the given clips into a [N, C, T, F] batch.
    pub fn batch(&self, indices: &[usize]) -> Array4<f64> {
        let (c, t_len, f_len) = self.features[indices[0]].dim();
        let mut x = Array4::zeros((indices.len(), c, t_len, f_len));
        for (slot, &i) in indices.iter().enumerate() {
            x.index_axis_mut(Axis(0), slot).assign(&self.features[i]);
        }
        x
    }

    pub fn targets(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.meta[i].distance_m).collect()
    }
}

/// Load one split of a manifest into memory. `base_dir` anchors the manifest's
/// relative clip paths; `fold` selects the rotation for fold-assigned sets.
pub fn load_split(
    manifest: &DatasetManifest,
    base_dir: &Path,
    split: Split,
    fold: Option<usize>,
    subset: ChannelSubset,
) -> Result<LoadedDataset> {
    let entries = manifest.split_entries(split, fold)?;
    if entries.is_empty() {
        return Err(Error::InvalidInput(format!(
            "manifest has no entries in the {split:?} split"
        )));
    }
    let loaded: Vec<(Array3<f64>, ClipMeta)> = entries
        .par_iter()
        .map(|e| -> Result<(Array3<f64>, ClipMeta)> {
            let clip = read_wav(&base_dir.join(&e.clip_path))?;
            let full = extract_features(&clip)?;
            let feat = select_channels(&full, subset);
            let (t_len, f_len, c) = feat.data.dim();
            let chw = feat
                .data
                .view()
                .permuted_axes([2, 0, 1])
                .as_standard_layout()
                .into_owned()
                .into_shape_with_order((c, t_len, f_len))
                .unwrap();
            let fold = match e.assignment {
                crate::scenegen::Assignment::Fold { fold } => Some(fold),
                _ => None,
            };
            Ok((
                chw,
                ClipMeta {
                    clip_id: e.clip_path.clone(),
                    distance_m: e.distance_m,
                    fold,
                    snr_db: e.snr_db,
                    drr_db: e.drr_db,
                },
            ))
        })
        .collect::<Result<_>>()?;

    let num_frames = loaded[0].0.shape()[1];
    for (feat, meta) in &loaded {
        if feat.shape()[1] != num_frames {
            return Err(Error::InvalidInput(format!(
                "mixed clip durations in one dataset: {} has {} frames, expected {num_frames}",
                meta.clip_id,
                feat.shape()[1]
            )));
        }
    }
    let (features, meta) = loaded.into_iter().unzip();
    Ok(LoadedDataset {
        features,
        meta,
        num_frames,
        subset,
    })
}
