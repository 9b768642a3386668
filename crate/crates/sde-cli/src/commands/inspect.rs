use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Axis;

use sde_core::audio::read_wav;
use sde_core::features::{extract_features, select_channels};
use sde_core::model::{load_checkpoint, AttentionMode};

use super::{write_matrix_csv, Outcome};

/// Export the magnitude spectrogram, per-channel attention maps, and both
/// prediction series for one clip.
pub fn run(clip_path: &Path, checkpoint: &Path, out_dir: &Path) -> Result<Outcome> {
    let (mut model, meta) = load_checkpoint(checkpoint)
        .with_context(|| format!("cannot load checkpoint {}", checkpoint.display()))?;
    if meta.model_config.attention_mode == AttentionMode::None {
        bail!(
            "checkpoint {} was trained without attention; there is no map to inspect",
            checkpoint.display()
        );
    }
    let clip = read_wav(clip_path)?;
    let full = extract_features(&clip)?;
    let mut features = select_channels(&full, meta.model_config.input_channels);

    // Longer clips are trimmed to the trained frame count; shorter ones
    // cannot feed the utterance head.
    let t_model = meta.model_config.num_frames;
    let t_clip = features.num_frames();
    if t_clip < t_model {
        bail!(
            "clip has {t_clip} frames but the model needs {t_model}; provide at least {:.2} s",
            (t_model * 256 + 256) as f64 / 16_000.0
        );
    }
    if t_clip > t_model {
        eprintln!("note: trimming clip from {t_clip} to {t_model} frames");
        features.data = features
            .data
            .slice(ndarray::s![..t_model, .., ..])
            .to_owned();
    }

    let (pred, map) = model.predict(&features)?;
    let map = map.expect("attention checkpoint emits a map");

    std::fs::create_dir_all(out_dir)?;
    write_matrix_csv(
        &out_dir.join("spectrogram.csv"),
        full.data.index_axis(Axis(2), 0),
    )?;
    for c in 0..map.shape()[0] {
        write_matrix_csv(
            &out_dir.join(format!("attention_ch{c}.csv")),
            map.index_axis(Axis(0), c),
        )?;
    }
    let mut framewise = String::from("frame,yhat_m\n");
    for (t, v) in pred.framewise.iter().enumerate() {
        framewise.push_str(&format!("{t},{v}\n"));
    }
    std::fs::write(out_dir.join("framewise.csv"), framewise)?;
    std::fs::write(
        out_dir.join("prediction.json"),
        serde_json::to_vec_pretty(&serde_json::json!({
            "clip": clip_path.display().to_string(),
            "checkpoint": checkpoint.display().to_string(),
            "utterance_m": pred.utterance,
            "num_frames": pred.framewise.len(),
        }))?,
    )?;
    println!(
        "predicted distance {:.3} m ({} frames); maps in {}",
        pred.utterance,
        pred.framewise.len(),
        out_dir.display()
    );
    Ok(Outcome::Success)
}
