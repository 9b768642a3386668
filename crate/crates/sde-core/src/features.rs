//! Time-frequency features: |STFT|, sin(phase), cos(phase) stacked T x F x C.
//!
//! 32 ms Hann window with 50% overlap at 16 kHz (512/256 samples), one-sided
//! spectrum (F = 257), no edge padding: only full windows produce frames.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array3, Axis};
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::container::{Container, ContainerWriter};
use crate::error::{Error, Result};

pub const WINDOW_LEN: usize = 512;
pub const HOP_LEN: usize = 256;
pub const NUM_BINS: usize = WINDOW_LEN / 2 + 1;
pub const WINDOW_S: f64 = 0.032;
pub const FRAME_HOP_S: f64 = 0.016;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSubset {
    All,
    MagnitudeOnly,
    PhaseOnly,
}

impl ChannelSubset {
    pub fn num_channels(self) -> usize {
        match self {
            ChannelSubset::All => 3,
            ChannelSubset::MagnitudeOnly => 1,
            ChannelSubset::PhaseOnly => 2,
        }
    }

    pub fn has_magnitude(self) -> bool {
        !matches!(self, ChannelSubset::PhaseOnly)
    }
}

/// T x F x C feature stack. With the full subset, channel 0 is |STFT|,
/// channel 1 sin(phase), channel 2 cos(phase).
#[derive(Debug, Clone)]
pub struct FeatureTensor {
    pub data: Array3<f64>,
    pub subset: ChannelSubset,
}

impl FeatureTensor {
    pub fn num_frames(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn num_bins(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn num_channels(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Number of frames produced for a clip of `len` samples; zero if shorter
/// than one window.
pub fn num_frames_for_len(len: usize) -> usize {
    if len < WINDOW_LEN {
        0
    } else {
        1 + (len - WINDOW_LEN) / HOP_LEN
    }
}

/// Periodic Hann window.
fn hann(size: usize) -> Vec<f64> {
    (0..size)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / size as f64).cos()))
        .collect()
}

pub fn extract_features(clip: &AudioClip) -> Result<FeatureTensor> {
    if clip.len() < WINDOW_LEN {
        return Err(Error::InvalidInput(format!(
            "clip {} has {} samples, shorter than one {WINDOW_LEN}-sample window",
            clip.source_id,
            clip.len()
        )));
    }
    let num_frames = num_frames_for_len(clip.len());
    let window = hann(WINDOW_LEN);

    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(WINDOW_LEN);
    let mut frame = vec![0.0; WINDOW_LEN];
    let mut spectrum = fft.make_output_vec();
    let mut scratch = fft.make_scratch_vec();

    let mut data = Array3::<f64>::zeros((num_frames, NUM_BINS, 3));
    for t in 0..num_frames {
        let start = t * HOP_LEN;
        for (j, f) in frame.iter_mut().enumerate() {
            *f = clip.samples[start + j] * window[j];
        }
        fft.process_with_scratch(&mut frame, &mut spectrum, &mut scratch)
            .expect("fft length is fixed");
        for (f, s) in spectrum.iter().enumerate() {
            let mag = (s.re * s.re + s.im * s.im).sqrt();
            data[[t, f, 0]] = mag;
            if mag == 0.0 {
                // Phase is undefined at zero magnitude; pin it to 0 rad.
                data[[t, f, 1]] = 0.0;
                data[[t, f, 2]] = 1.0;
            } else {
                let phase = s.im.atan2(s.re);
                data[[t, f, 1]] = phase.sin();
                data[[t, f, 2]] = phase.cos();
            }
        }
    }
    Ok(FeatureTensor {
        data,
        subset: ChannelSubset::All,
    })
}

/// Slice a channel subset out of a full feature stack.
pub fn select_channels(x: &FeatureTensor, subset: ChannelSubset) -> FeatureTensor {
    assert_eq!(
        x.subset,
        ChannelSubset::All,
        "channel selection starts from the full stack"
    );
    let data = match subset {
        ChannelSubset::All => x.data.clone(),
        ChannelSubset::MagnitudeOnly => x
            .data
            .index_axis(Axis(2), 0)
            .insert_axis(Axis(2))
            .to_owned(),
        ChannelSubset::PhaseOnly => x.data.slice(ndarray::s![.., .., 1..3]).to_owned(),
    };
    FeatureTensor { data, subset }
}

/// Hash of the extraction configuration, embedded in caches and checkpoints so
/// stale features cannot silently feed a model.
pub fn extraction_config_hash() -> String {
    format!("stft-hann{WINDOW_LEN}-hop{HOP_LEN}-f{NUM_BINS}-16khz-v1")
}

pub fn write_feature_cache(path: &Path, feat: &FeatureTensor) -> Result<()> {
    let meta = serde_json::json!({
        "subset": feat.subset,
        "extraction": extraction_config_hash(),
    });
    let mut w = ContainerWriter::new("features", meta);
    let data = feat
        .data
        .as_slice()
        .expect("feature tensor is standard layout");
    w.add_tensor("data", feat.data.shape(), data);
    w.write(path)
}

pub fn read_feature_cache(path: &Path) -> Result<FeatureTensor> {
    let c = Container::read(path)?;
    if c.kind() != "features" {
        return Err(Error::InvalidInput(format!(
            "{}: not a feature cache",
            path.display()
        )));
    }
    if c.meta()["extraction"] != extraction_config_hash() {
        return Err(Error::InvalidInput(format!(
            "{}: cached with a different extraction config",
            path.display()
        )));
    }
    let subset: ChannelSubset = serde_json::from_value(c.meta()["subset"].clone())?;
    let (shape, data) = c.tensor("data")?;
    let data = Array3::from_shape_vec((shape[0], shape[1], shape[2]), data)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok(FeatureTensor { data, subset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::SAMPLE_RATE_HZ;

    fn sine_clip(freq: f64, len: usize, amp: f64) -> AudioClip {
        let samples = (0..len)
            .map(|n| amp * (2.0 * PI * freq * n as f64 / SAMPLE_RATE_HZ as f64).sin())
            .collect();
        AudioClip::new(samples, "sine")
    }

    #[test]
    fn ten_second_clip_shape() {
        let clip = AudioClip::new(vec![0.1; 160_000], "c");
        let feat = extract_features(&clip).unwrap();
        assert_eq!(feat.num_frames(), 624);
        assert_eq!(feat.num_bins(), 257);
        assert_eq!(feat.num_channels(), 3);
    }

    #[test]
    fn short_clip_rejected() {
        let clip = AudioClip::new(vec![0.0; WINDOW_LEN - 1], "short");
        assert!(extract_features(&clip).is_err());
    }

    #[test]
    fn pure_tone_concentrates_at_its_bin() {
        // 1 kHz at 16 kHz with a 512 window lands exactly on bin 32.
        let clip = sine_clip(1000.0, 8192, 1.0);
        let feat = extract_features(&clip).unwrap();
        for t in 1..feat.num_frames() - 1 {
            let row = feat.data.slice(ndarray::s![t, .., 0]);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, 32, "frame {t}");
        }
    }

    #[test]
    fn phase_channels_lie_on_unit_circle() {
        let clip = sine_clip(733.0, 4096, 0.7);
        let feat = extract_features(&clip).unwrap();
        for t in 0..feat.num_frames() {
            for f in 0..feat.num_bins() {
                let s = feat.data[[t, f, 1]];
                let c = feat.data[[t, f, 2]];
                assert!((s * s + c * c - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn hop_shift_moves_frames_by_one() {
        let clip = sine_clip(310.0, 6000, 0.5);
        let mut shifted = vec![0.0; HOP_LEN];
        shifted.extend_from_slice(&clip.samples);
        let shifted = AudioClip::new(shifted, "shifted");
        let a = extract_features(&clip).unwrap();
        let b = extract_features(&shifted).unwrap();
        for t in 0..a.num_frames() - 1 {
            for f in 0..NUM_BINS {
                for c in 0..3 {
                    assert!(
                        (a.data[[t, f, c]] - b.data[[t + 1, f, c]]).abs() < 1e-5,
                        "t={t} f={f} c={c}"
                    );
                }
            }
        }
    }

    #[test]
    fn scaling_input_scales_magnitude_and_fixes_phase() {
        let a = extract_features(&sine_clip(620.0, 4096, 0.3)).unwrap();
        let b = extract_features(&sine_clip(620.0, 4096, 0.9)).unwrap();
        for t in 0..a.num_frames() {
            for f in 0..NUM_BINS {
                let ma = a.data[[t, f, 0]];
                let mb = b.data[[t, f, 0]];
                assert!((mb - 3.0 * ma).abs() < 1e-6 * mb.max(1.0));
                if ma > 1e-9 {
                    assert!((a.data[[t, f, 1]] - b.data[[t, f, 1]]).abs() < 1e-6);
                    assert!((a.data[[t, f, 2]] - b.data[[t, f, 2]]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn channel_subsets() {
        let full = extract_features(&sine_clip(500.0, 2048, 0.5)).unwrap();
        let mag = select_channels(&full, ChannelSubset::MagnitudeOnly);
        let phase = select_channels(&full, ChannelSubset::PhaseOnly);
        assert_eq!(mag.num_channels(), 1);
        assert_eq!(phase.num_channels(), 2);
        assert_eq!(mag.data[[3, 10, 0]], full.data[[3, 10, 0]]);
        assert_eq!(phase.data[[3, 10, 0]], full.data[[3, 10, 1]]);
        assert_eq!(phase.data[[3, 10, 1]], full.data[[3, 10, 2]]);
    }

    #[test]
    fn channels_reconstruct_the_complex_stft() {
        // Oracle: direct O(N^2) DFT of the windowed frame.
        let clip = sine_clip(777.0, 2048, 0.6);
        let feat = extract_features(&clip).unwrap();
        let window = hann(WINDOW_LEN);
        for &t in &[0usize, 3, 5] {
            let frame: Vec<f64> = (0..WINDOW_LEN)
                .map(|j| clip.samples[t * HOP_LEN + j] * window[j])
                .collect();
            for &k in &[0usize, 17, 96, 256] {
                let mut re = 0.0;
                let mut im = 0.0;
                for (j, &x) in frame.iter().enumerate() {
                    let phase = -2.0 * PI * (k * j) as f64 / WINDOW_LEN as f64;
                    re += x * phase.cos();
                    im += x * phase.sin();
                }
                let mag = feat.data[[t, k, 0]];
                let rec_re = mag * feat.data[[t, k, 2]];
                let rec_im = mag * feat.data[[t, k, 1]];
                assert!((rec_re - re).abs() < 1e-6, "t={t} k={k}: {rec_re} vs {re}");
                assert!((rec_im - im).abs() < 1e-6, "t={t} k={k}: {rec_im} vs {im}");
            }
        }
    }

    #[test]
    fn feature_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.feat");
        let feat = extract_features(&sine_clip(410.0, 2048, 0.5)).unwrap();
        write_feature_cache(&path, &feat).unwrap();
        let back = read_feature_cache(&path).unwrap();
        assert_eq!(back.data, feat.data);
        assert_eq!(back.subset, feat.subset);
    }
}
