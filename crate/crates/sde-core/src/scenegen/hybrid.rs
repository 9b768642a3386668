//! Hybrid dataset builder: measured RIRs (WAV + CSV distance annotations)
//! convolved with dry speech, split at the RIR level so no response leaks
//! across train/val/test.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::{Assignment, DatasetEntry, DatasetManifest, Realism, Split};
use super::mix::{convolve_scene, mix_noise};
use super::synthetic::{dry_clip, list_wavs, noise_clip};
use super::{config_hash, write_manifest, BuildReport};
use crate::audio::{read_wav, write_wav, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::roomsim::{compute_drr, estimate_rt60, Rir};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridConfig {
    /// CSV with columns rir_path, distance_m, room_id; paths are relative to
    /// the CSV's directory.
    pub rir_csv: PathBuf,
    pub clips_per_rir: usize,
    pub duration_s: f64,
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// Train/val/test fractions over RIRs.
    pub split_ratios: [f64; 3],
    pub speech_dir: Option<PathBuf>,
    pub noise_dir: Option<PathBuf>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            rir_csv: PathBuf::new(),
            clips_per_rir: 5,
            duration_s: 10.0,
            snr_db: None,
            seed: 0,
            split_ratios: [0.7, 0.1, 0.2],
            speech_dir: None,
            noise_dir: None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct RirRow {
    rir_path: String,
    distance_m: Option<f64>,
    room_id: Option<String>,
}

/// Shuffle indices and cut train/val/test at floor(r0 n) and floor(r1 n).
pub(crate) fn ratio_split(count: usize, ratios: [f64; 3], seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut stream_rng(seed, 0x5b117));
    let n_train = (ratios[0] * count as f64).floor() as usize;
    let n_val = (ratios[1] * count as f64).floor() as usize;
    let mut out = vec![Split::Test; count];
    for (rank, &idx) in order.iter().enumerate() {
        out[idx] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    out
}

pub fn build_hybrid_dataset(
    config: &HybridConfig,
    out_dir: &Path,
) -> Result<(DatasetManifest, BuildReport)> {
    if config.clips_per_rir == 0 {
        return Err(Error::InvalidConfig("clips_per_rir must be positive".into()));
    }
    let csv_dir = config
        .rir_csv
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let mut reader = csv::Reader::from_path(&config.rir_csv).map_err(|e| Error::MissingData {
        path: config.rir_csv.clone(),
        detail: format!("expected CSV with columns rir_path,distance_m,room_id: {e}"),
    })?;
    let mut report = BuildReport::default();
    let mut rirs: Vec<(PathBuf, f64, String)> = Vec::new();
    for row in reader.deserialize::<RirRow>() {
        let row = row.map_err(|e| Error::InvalidInput(format!("bad annotation row: {e}")))?;
        match row.distance_m {
            Some(d) if d > 0.0 => {
                let room = row.room_id.unwrap_or_else(|| "unknown".into());
                rirs.push((csv_dir.join(&row.rir_path), d, room));
            }
            _ => report.warn(format!("{}: missing distance annotation", row.rir_path)),
        }
    }
    if rirs.is_empty() {
        return Err(Error::MissingData {
            path: config.rir_csv.clone(),
            detail: "no usable RIR annotations".into(),
        });
    }

    let speech_files = config.speech_dir.as_deref().map(list_wavs).transpose()?;
    let noise_files = config.noise_dir.as_deref().map(list_wavs).transpose()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let splits = ratio_split(rirs.len(), config.split_ratios, config.seed);
    let target_len = (config.duration_s * SAMPLE_RATE_HZ as f64).round() as usize;

    let mut entries = Vec::with_capacity(rirs.len() * config.clips_per_rir);
    for (r, ((rir_path, distance, room_id), split)) in rirs.iter().zip(&splits).enumerate() {
        let wav = read_wav(rir_path)?;
        let direct_delay = wav
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i as f64)
            .unwrap_or(0.0);
        let est = estimate_rt60(&wav.samples, wav.sample_rate_hz);
        let drr = compute_drr(&wav.samples, direct_delay, wav.sample_rate_hz);
        let rir = Rir {
            sample_rate_hz: wav.sample_rate_hz,
            taps: wav.samples,
            rt60_s: est.seconds,
            drr_db: drr,
            direct_delay_samples: direct_delay,
            truncated: false,
            rt60_degraded: est.degraded,
        };
        let rir_id = rir_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("rir{r:04}"));

        for k in 0..config.clips_per_rir {
            let clip_seed = derive_seed(config.seed, (r * config.clips_per_rir + k) as u64);
            let dry = dry_clip(
                config.speech_dir.as_deref(),
                speech_files.as_deref(),
                clip_seed,
                config.duration_s,
            )?;
            let mut wet = convolve_scene(&dry, &rir)?;
            wet.fit_to_length(target_len);
            wet.peak_normalize(0.9);
            let clip = match config.snr_db {
                None => wet,
                Some(snr) => {
                    let noise = noise_clip(
                        config.noise_dir.as_deref(),
                        noise_files.as_deref(),
                        derive_seed(clip_seed, 2),
                        config.duration_s + 1.0,
                    )?;
                    mix_noise(&wet, &noise, snr, derive_seed(clip_seed, 3))?
                }
            };
            let clip_rel = format!("clips/{rir_id}_{k}.wav");
            write_wav(&out_dir.join(&clip_rel), &clip)?;
            entries.push(DatasetEntry {
                clip_path: clip_rel,
                distance_m: *distance,
                assignment: Assignment::Split(*split),
                snr_db: config.snr_db,
                rt60_s: Some(rir.rt60_s),
                drr_db: Some(rir.drr_db),
                room_id: Some(room_id.clone()),
                rir_id: Some(rir_id.clone()),
                seed: Some(clip_seed),
                sidecar_path: None,
            });
        }
    }
    report.built = entries.len();
    let manifest = DatasetManifest {
        realism: Realism::Hybrid,
        config_hash: config_hash(config),
        peak_norm: Some(0.9),
        num_folds: None,
        entries,
    };
    write_manifest(&out_dir.join("manifest.jsonl"), &manifest)?;
    Ok((manifest, report))
}
