//! Simulated-RIR dataset builder: sample scenes, synthesize RIRs, convolve
//! with dry speech, optionally add noise at one fixed SNR, and write a
//! fold-assigned manifest.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Assignment, DatasetEntry, DatasetManifest, Realism};
use super::mix::{convolve_scene, mix_noise};
use super::speechgen::{generate_noise, generate_speech_like};
use super::{config_hash, write_manifest, BuildReport};
use crate::audio::{read_wav, write_wav, AudioClip, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::roomsim::{
    sample_scene, synthesize_rir_auto, MaterialTable, RirOptions, SceneSamplingConfig, SceneSpec,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub num_scenes: usize,
    pub duration_s: f64,
    pub folds: usize,
    /// One fixed SNR per dataset build; `None` builds the clean variant.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub sampling: SceneSamplingConfig,
    pub rir: RirOptions,
    /// Directory of dry mono WAVs; the bundled generator is used when unset.
    pub speech_dir: Option<PathBuf>,
    /// Directory of noise WAVs; the bundled generator is used when unset.
    pub noise_dir: Option<PathBuf>,
    /// Alternative material table JSON; the bundled table is used when unset.
    pub material_table: Option<PathBuf>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_scenes: 2500,
            duration_s: 10.0,
            folds: 5,
            snr_db: None,
            seed: 0,
            sampling: SceneSamplingConfig::default(),
            rir: RirOptions::default(),
            speech_dir: None,
            noise_dir: None,
            material_table: None,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_scenes == 0 {
            return Err(Error::InvalidConfig("num_scenes must be positive".into()));
        }
        if self.folds < 2 || self.folds > self.num_scenes {
            return Err(Error::InvalidConfig(format!(
                "folds {} invalid for {} scenes",
                self.folds, self.num_scenes
            )));
        }
        if !(self.duration_s > 0.1) {
            return Err(Error::InvalidConfig("duration_s too short".into()));
        }
        self.sampling.validate()
    }
}

/// Sorted WAV listing of a corpus directory.
pub(crate) fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|_| Error::MissingData {
        path: dir.to_path_buf(),
        detail: "expected a directory of mono WAV files".into(),
    })?;
    let mut wavs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "wav").unwrap_or(false))
        .collect();
    wavs.sort();
    if wavs.is_empty() {
        return Err(Error::MissingData {
            path: dir.to_path_buf(),
            detail: "no .wav files found".into(),
        });
    }
    Ok(wavs)
}

/// Pick a dry clip of exactly `duration_s`: random corpus file (random crop
/// or zero-pad) or the bundled speech-like generator.
pub(crate) fn dry_clip(
    speech_dir: Option<&Path>,
    corpus: Option<&[PathBuf]>,
    seed: u64,
    duration_s: f64,
) -> Result<AudioClip> {
    let target = (duration_s * SAMPLE_RATE_HZ as f64).round() as usize;
    match (speech_dir, corpus) {
        (Some(_), Some(files)) => {
            let mut rng = stream_rng(seed, 0xd47);
            let path = &files[rng.gen_range(0..files.len())];
            let mut clip = read_wav(path)?;
            if clip.len() > target {
                let offset = rng.gen_range(0..=clip.len() - target);
                clip.samples = clip.samples[offset..offset + target].to_vec();
            } else {
                clip.fit_to_length(target);
            }
            Ok(clip)
        }
        _ => Ok(generate_speech_like(seed, duration_s)),
    }
}

pub(crate) fn noise_clip(
    noise_dir: Option<&Path>,
    corpus: Option<&[PathBuf]>,
    seed: u64,
    min_duration_s: f64,
) -> Result<AudioClip> {
    match (noise_dir, corpus) {
        (Some(_), Some(files)) => {
            let mut rng = stream_rng(seed, 0xd48);
            let path = &files[rng.gen_range(0..files.len())];
            read_wav(path)
        }
        _ => Ok(generate_noise(seed, min_duration_s)),
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    scene: &'a SceneSpec,
    distance_m: f64,
    rt60_s: f64,
    drr_db: f64,
    seed: u64,
    rir_truncated: bool,
}

/// Build the synthetic dataset under `out_dir`: clips/, rirs/, sidecars/ and
/// manifest.jsonl. Deterministic in (config, seed); per-scene work runs in
/// parallel.
pub fn build_synthetic_dataset(
    config: &SyntheticConfig,
    out_dir: &Path,
) -> Result<(DatasetManifest, BuildReport)> {
    config.validate()?;
    let table = match &config.material_table {
        Some(path) => MaterialTable::from_json_file(path)?,
        None => MaterialTable::bundled(),
    };
    let speech_files = config.speech_dir.as_deref().map(list_wavs).transpose()?;
    let noise_files = config.noise_dir.as_deref().map(list_wavs).transpose()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let sampling = SceneSamplingConfig {
        ..config.sampling.clone()
    };
    let n = config.num_scenes;
    let target_len = (config.duration_s * SAMPLE_RATE_HZ as f64).round() as usize;

    let entries: Vec<DatasetEntry> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<DatasetEntry> {
            let scene_seed = derive_seed(config.seed, i as u64);
            let scene = sample_scene(scene_seed, &sampling, &table)?;
            let rir = synthesize_rir_auto(&scene, &config.rir)?;

            let dry = dry_clip(
                config.speech_dir.as_deref(),
                speech_files.as_deref(),
                derive_seed(scene_seed, 1),
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
                        derive_seed(scene_seed, 2),
                        config.duration_s + 1.0,
                    )?;
                    mix_noise(&wet, &noise, snr, derive_seed(scene_seed, 3))?
                }
            };

            let stem = format!("scene{i:05}");
            let clip_rel = format!("clips/{stem}.wav");
            let rir_rel = format!("rirs/{stem}.wav");
            let sidecar_rel = format!("sidecars/{stem}.json");
            write_wav(&out_dir.join(&clip_rel), &clip)?;
            write_wav(
                &out_dir.join(&rir_rel),
                &AudioClip {
                    sample_rate_hz: rir.sample_rate_hz,
                    samples: rir.taps.clone(),
                    source_id: stem.clone(),
                },
            )?;
            let sidecar = Sidecar {
                scene: &scene,
                distance_m: scene.distance_m,
                rt60_s: rir.rt60_s,
                drr_db: rir.drr_db,
                seed: scene_seed,
                rir_truncated: rir.truncated,
            };
            let sidecar_path = out_dir.join(&sidecar_rel);
            if let Some(parent) = sidecar_path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&sidecar_path, serde_json::to_vec_pretty(&sidecar)?)
                .map_err(|e| Error::io(&sidecar_path, e))?;

            Ok(DatasetEntry {
                clip_path: clip_rel,
                distance_m: scene.distance_m,
                assignment: Assignment::Fold {
                    fold: i * config.folds / n,
                },
                snr_db: config.snr_db,
                rt60_s: Some(rir.rt60_s),
                drr_db: Some(rir.drr_db),
                room_id: Some(stem),
                rir_id: None,
                seed: Some(scene_seed),
                sidecar_path: Some(sidecar_rel),
            })
        })
        .collect::<Result<_>>()?;

    let manifest = DatasetManifest {
        realism: Realism::Synthetic,
        config_hash: config_hash(config),
        peak_norm: Some(0.9),
        num_folds: Some(config.folds),
        entries,
    };
    write_manifest(&out_dir.join("manifest.jsonl"), &manifest)?;
    let report = BuildReport {
        built: manifest.entries.len(),
        ..Default::default()
    };
    Ok((manifest, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::manifest::Split;

    fn tiny_config(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            num_scenes: 10,
            duration_s: 0.6,
            folds: 5,
            seed,
            rir: RirOptions {
                max_image_count: 20_000,
                max_length_s: 0.4,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn fold_sizes_scale_proportionally() {
        let dir = tempfile::tempdir().unwrap();
        let (manifest, report) = build_synthetic_dataset(&tiny_config(5), dir.path()).unwrap();
        assert_eq!(report.built, 10);
        for fold in 0..5 {
            let train = manifest.split_entries(Split::Train, Some(fold)).unwrap();
            let val = manifest.split_entries(Split::Val, Some(fold)).unwrap();
            let test = manifest.split_entries(Split::Test, Some(fold)).unwrap();
            assert_eq!((train.len(), val.len(), test.len()), (6, 2, 2));
        }
        // Audio files exist and have the declared duration.
        let clip = read_wav(&dir.path().join(&manifest.entries[0].clip_path)).unwrap();
        assert_eq!(clip.len(), (0.6 * 16_000.0) as usize);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        build_synthetic_dataset(&tiny_config(7), d1.path()).unwrap();
        build_synthetic_dataset(&tiny_config(7), d2.path()).unwrap();
        let m1 = std::fs::read(d1.path().join("manifest.jsonl")).unwrap();
        let m2 = std::fs::read(d2.path().join("manifest.jsonl")).unwrap();
        assert_eq!(m1, m2);
        let c1 = std::fs::read(d1.path().join("clips/scene00003.wav")).unwrap();
        let c2 = std::fs::read(d2.path().join("clips/scene00003.wav")).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn noisy_build_records_snr() {
        let dir = tempfile::tempdir().unwrap();
        let config = SyntheticConfig {
            snr_db: Some(10.0),
            ..tiny_config(3)
        };
        let (manifest, _) = build_synthetic_dataset(&config, dir.path()).unwrap();
        assert!(manifest.entries.iter().all(|e| e.snr_db == Some(10.0)));
    }

    #[test]
    fn missing_speech_dir_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let config = SyntheticConfig {
            speech_dir: Some(dir.path().join("nope")),
            ..tiny_config(1)
        };
        let err = build_synthetic_dataset(&config, dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingData { .. }));
    }
}
