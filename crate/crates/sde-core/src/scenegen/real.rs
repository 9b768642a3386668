//! Real-recording ingestion: cut fixed-length excerpts where exactly one
//! annotated speech source is active, label them with its distance.
//!
//! Annotations are CSVs at 100 ms frame resolution with columns
//! (frame_index, class_label, source_id, distance_m), one file per recording,
//! next to audio named `<stem>.wav` in the audio directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::hybrid::ratio_split;
use super::manifest::{Assignment, DatasetEntry, DatasetManifest, Realism};
use super::{config_hash, write_manifest, BuildReport};
use crate::audio::{read_wav, write_wav, AudioClip, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

/// Annotation frame resolution, seconds.
pub const FRAME_HOP_S: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RealIngestConfig {
    pub annotations_dir: PathBuf,
    pub audio_dir: PathBuf,
    pub excerpt_s: f64,
    pub speech_class: String,
    pub seed: u64,
    pub split_ratios: [f64; 3],
}

impl Default for RealIngestConfig {
    fn default() -> Self {
        RealIngestConfig {
            annotations_dir: PathBuf::new(),
            audio_dir: PathBuf::new(),
            excerpt_s: 2.0,
            speech_class: "speech".into(),
            seed: 0,
            split_ratios: [0.7, 0.1, 0.2],
        }
    }
}

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    frame_index: usize,
    class_label: String,
    source_id: String,
    distance_m: f64,
}

struct Excerpt {
    start_frame: usize,
    distance_m: f64,
}

/// Scan one recording's frame table for windows where a single speech source
/// is active on every frame.
fn scan_excerpts(
    rows: &[AnnotationRow],
    frames_per_excerpt: usize,
    speech_class: &str,
) -> Vec<Excerpt> {
    let mut by_frame: BTreeMap<usize, Vec<&AnnotationRow>> = BTreeMap::new();
    for row in rows {
        by_frame.entry(row.frame_index).or_default().push(row);
    }
    let max_frame = match by_frame.keys().next_back() {
        Some(&f) => f,
        None => return Vec::new(),
    };
    let mut out = Vec::new();
    let mut start = 0;
    while start + frames_per_excerpt <= max_frame + 1 {
        let window = start..start + frames_per_excerpt;
        let mut source: Option<&str> = None;
        let mut distances = Vec::with_capacity(frames_per_excerpt);
        let mut valid = true;
        for f in window {
            match by_frame.get(&f).map(Vec::as_slice) {
                Some([row]) if row.class_label == speech_class => {
                    if *source.get_or_insert(&row.source_id) != row.source_id {
                        valid = false;
                        break;
                    }
                    distances.push(row.distance_m);
                }
                // Silence, a non-speech source, or overlapping sources.
                _ => {
                    valid = false;
                    break;
                }
            }
        }
        if valid {
            out.push(Excerpt {
                start_frame: start,
                distance_m: distances.iter().sum::<f64>() / distances.len() as f64,
            });
        }
        start += frames_per_excerpt;
    }
    out
}

pub fn ingest_real_recordings(
    config: &RealIngestConfig,
    out_dir: &Path,
) -> Result<(DatasetManifest, BuildReport)> {
    if !(config.excerpt_s > 0.0) {
        return Err(Error::InvalidConfig("excerpt_s must be positive".into()));
    }
    let frames_per_excerpt = (config.excerpt_s / FRAME_HOP_S).round() as usize;
    if frames_per_excerpt == 0 {
        return Err(Error::InvalidConfig(format!(
            "excerpt_s {} is below the {FRAME_HOP_S} s frame resolution",
            config.excerpt_s
        )));
    }
    let mut annotation_files: Vec<PathBuf> = std::fs::read_dir(&config.annotations_dir)
        .map_err(|_| Error::MissingData {
            path: config.annotations_dir.clone(),
            detail: "expected a directory of per-recording annotation CSVs".into(),
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
        .collect();
    annotation_files.sort();
    if annotation_files.is_empty() {
        return Err(Error::MissingData {
            path: config.annotations_dir.clone(),
            detail: "no .csv annotation files found".into(),
        });
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut report = BuildReport::default();
    let excerpt_len = (config.excerpt_s * SAMPLE_RATE_HZ as f64).round() as usize;
    let mut pending: Vec<(String, f64)> = Vec::new();

    for ann_path in &annotation_files {
        let stem = ann_path.file_stem().unwrap().to_string_lossy().into_owned();
        let mut reader =
            csv::Reader::from_path(ann_path).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let rows: Vec<AnnotationRow> = reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", ann_path.display())))?;
        let excerpts = scan_excerpts(&rows, frames_per_excerpt, &config.speech_class);
        if excerpts.is_empty() {
            report.warn(format!("{stem}: no single-speech excerpts"));
            continue;
        }
        let audio_path = config.audio_dir.join(format!("{stem}.wav"));
        let audio = read_wav(&audio_path).map_err(|_| Error::MissingData {
            path: audio_path.clone(),
            detail: format!("audio for annotation {stem}"),
        })?;
        for ex in excerpts {
            let start = (ex.start_frame as f64 * FRAME_HOP_S * SAMPLE_RATE_HZ as f64).round()
                as usize;
            if start + excerpt_len > audio.len() {
                report.warn(format!(
                    "{stem}: excerpt at frame {} runs past the audio",
                    ex.start_frame
                ));
                continue;
            }
            let clip = AudioClip::new(
                audio.samples[start..start + excerpt_len].to_vec(),
                format!("{stem}_f{:05}", ex.start_frame),
            );
            let clip_rel = format!("clips/{stem}_f{:05}.wav", ex.start_frame);
            write_wav(&out_dir.join(&clip_rel), &clip)?;
            pending.push((clip_rel, ex.distance_m));
        }
    }

    if pending.is_empty() {
        return Err(Error::InvalidInput(
            "no usable excerpts in any recording".into(),
        ));
    }
    let splits = ratio_split(pending.len(), config.split_ratios, config.seed);
    let entries = pending
        .into_iter()
        .zip(splits)
        .map(|((clip_path, distance_m), split)| DatasetEntry {
            clip_path,
            distance_m,
            assignment: Assignment::Split(split),
            snr_db: None,
            rt60_s: None,
            drr_db: None,
            room_id: None,
            rir_id: None,
            seed: None,
            sidecar_path: None,
        })
        .collect();
    let manifest = DatasetManifest {
        realism: Realism::Real,
        config_hash: config_hash(config),
        peak_norm: None,
        num_folds: None,
        entries,
    };
    report.built = manifest.entries.len();
    write_manifest(&out_dir.join("manifest.jsonl"), &manifest)?;
    Ok((manifest, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_annotation(path: &Path, rows: &[(usize, &str, &str, f64)]) {
        let mut f = std::fs::File::create(path).unwrap();
        writeln!(f, "frame_index,class_label,source_id,distance_m").unwrap();
        for (frame, class, source, d) in rows {
            writeln!(f, "{frame},{class},{source},{d}").unwrap();
        }
    }

    fn setup(dir: &Path) -> RealIngestConfig {
        let ann = dir.join("ann");
        let audio = dir.join("audio");
        std::fs::create_dir_all(&ann).unwrap();
        std::fs::create_dir_all(&audio).unwrap();
        RealIngestConfig {
            annotations_dir: ann,
            audio_dir: audio,
            excerpt_s: 2.0,
            ..Default::default()
        }
    }

    fn tone(len: usize) -> AudioClip {
        AudioClip::new(
            (0..len).map(|i| (i as f64 * 0.05).sin() * 0.5).collect(),
            "t",
        )
    }

    #[test]
    fn single_source_yields_expected_excerpts() {
        let dir = tempfile::tempdir().unwrap();
        let config = setup(dir.path());
        // One speech source active 0..4 s at 2.0 m -> frames 0..39.
        let rows: Vec<(usize, &str, &str, f64)> =
            (0..40).map(|f| (f, "speech", "s1", 2.0)).collect();
        write_annotation(&config.annotations_dir.join("rec1.csv"), &rows);
        write_wav(&config.audio_dir.join("rec1.wav"), &tone(4 * 16_000)).unwrap();
        let out = dir.path().join("out");
        let (manifest, report) = ingest_real_recordings(&config, &out).unwrap();
        assert_eq!(report.built, 2);
        assert_eq!(manifest.entries.len(), 2);
        assert!(manifest.entries.iter().all(|e| e.distance_m == 2.0));
        let clip = read_wav(&out.join(&manifest.entries[0].clip_path)).unwrap();
        assert_eq!(clip.len(), 32_000);
    }

    #[test]
    fn overlapping_sources_yield_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let config = setup(dir.path());
        let mut rows: Vec<(usize, &str, &str, f64)> = Vec::new();
        for f in 0..40 {
            rows.push((f, "speech", "s1", 2.0));
            rows.push((f, "speech", "s2", 3.0));
        }
        write_annotation(&config.annotations_dir.join("rec1.csv"), &rows);
        write_wav(&config.audio_dir.join("rec1.wav"), &tone(4 * 16_000)).unwrap();
        let out = dir.path().join("out");
        let err = ingest_real_recordings(&config, &out).unwrap_err();
        assert!(err.to_string().contains("no usable excerpts"));
    }

    #[test]
    fn excerpt_count_matches_brute_force_span_scan() {
        let dir = tempfile::tempdir().unwrap();
        let config = setup(dir.path());
        // Synthetic fixture: speech s1 frames 0..25, silence, music 40..60,
        // speech s2 63..100; overlap s1+s2 at 80..85 invalidates one window.
        let mut rows: Vec<(usize, &str, &str, f64)> = Vec::new();
        for f in 0..25 {
            rows.push((f, "speech", "s1", 1.5));
        }
        for f in 40..60 {
            rows.push((f, "music", "m1", 2.0));
        }
        for f in 63..100 {
            rows.push((f, "speech", "s2", 3.0));
        }
        for f in 80..85 {
            rows.push((f, "speech", "s1", 1.5));
        }
        write_annotation(&config.annotations_dir.join("rec1.csv"), &rows);
        write_wav(&config.audio_dir.join("rec1.wav"), &tone(10 * 16_000)).unwrap();

        // Brute-force oracle over non-overlapping 20-frame windows.
        let mut frame_state = vec![Vec::new(); 100];
        for (f, c, s, _) in &rows {
            frame_state[*f].push((*c, *s));
        }
        let mut expected = 0;
        for w0 in (0..=80).step_by(20) {
            let ok = (w0..w0 + 20).all(|f| {
                frame_state[f].len() == 1
                    && frame_state[f][0].0 == "speech"
                    && frame_state[f][0].1 == frame_state[w0][0].1
            });
            if ok && !frame_state[w0].is_empty() {
                expected += 1;
            }
        }
        let out = dir.path().join("out");
        let (manifest, _) = ingest_real_recordings(&config, &out).unwrap();
        assert_eq!(manifest.entries.len(), expected);
        assert!(expected >= 1);
    }
}
