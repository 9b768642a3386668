//! Optimization under the dual utterance/frame loss: fresh training,
//! fine-tuning from a checkpoint, and per-SNR model families.

mod adam;
mod dataset;

pub use adam::{clip_global_norm, Adam, PlateauScheduler};
pub use dataset::{load_split, ClipMeta, LoadedDataset};

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::PredictionRecord;
use crate::model::{
    load_checkpoint, save_checkpoint, BatchPrediction, DistancePrediction, Model, ModelConfig,
    TrainingState, UtteranceHead,
};
use crate::rng::stream_rng;

/// Ground truth for one clip: the scalar distance and the frame-wise vector
/// (constant for static sources).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetLabels {
    pub y: f64,
    pub y_t: Vec<f64>,
}

impl TargetLabels {
    /// Static-source labels: every frame carries the utterance distance.
    pub fn static_source(y: f64, num_frames: usize) -> Result<Self> {
        if !(y > 0.0) {
            return Err(Error::InvalidInput(format!(
                "distance label must be positive, got {y}"
            )));
        }
        Ok(TargetLabels {
            y,
            y_t: vec![y; num_frames],
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lr_decay_factor: f64,
    pub plateau_patience_epochs: usize,
    pub grad_clip_norm: f64,
    pub seed: u64,
    pub finetune_from: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            learning_rate: 1e-3,
            batch_size: 16,
            lr_decay_factor: 0.8,
            plateau_patience_epochs: 5,
            grad_clip_norm: 5.0,
            seed: 0,
            finetune_from: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lr_decay_factor {} outside (0,1)",
                self.lr_decay_factor
            )));
        }
        Ok(())
    }
}

/// Per-clip loss: (y - yhat)^2 plus the squared L2 norm of the frame-wise
/// error vector.
pub fn loss(pred: &DistancePrediction, target: &TargetLabels) -> Result<f64> {
    if pred.framewise.len() != target.y_t.len() {
        return Err(Error::ShapeMismatch(format!(
            "framewise length {} vs target length {}",
            pred.framewise.len(),
            target.y_t.len()
        )));
    }
    if !pred.utterance.is_finite() || pred.framewise.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged("non-finite prediction".into()));
    }
    let utter = (target.y - pred.utterance).powi(2);
    let frame: f64 = target
        .y_t
        .iter()
        .zip(&pred.framewise)
        .map(|(y, yh)| (y - yh) * (y - yh))
        .sum();
    Ok(utter + frame)
}

/// Mean loss over a batch of static-source clips.
pub fn batch_loss(pred: &BatchPrediction, targets: &[f64]) -> Result<f64> {
    let n = targets.len();
    if pred.utterance.len() != n {
        return Err(Error::ShapeMismatch("batch size mismatch".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let framewise = pred.framewise.row(i);
        if !pred.utterance[i].is_finite() || framewise.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!("non-finite prediction at item {i}")));
        }
        let y = targets[i];
        total += (y - pred.utterance[i]).powi(2);
        total += framewise.iter().map(|yh| (y - yh) * (y - yh)).sum::<f64>();
    }
    Ok(total / n as f64)
}

/// Gradients of the mean batch loss with respect to both outputs.
pub fn batch_loss_grads(pred: &BatchPrediction, targets: &[f64]) -> (Array1<f64>, Array2<f64>) {
    let (n, t_len) = pred.framewise.dim();
    let mut g_utt = Array1::zeros(n);
    let mut g_frame = Array2::zeros((n, t_len));
    for i in 0..n {
        let y = targets[i];
        g_utt[i] = 2.0 * (pred.utterance[i] - y) / n as f64;
        for t in 0..t_len {
            g_frame[[i, t]] = 2.0 * (pred.framewise[[i, t]] - y) / n as f64;
        }
    }
    (g_utt, g_frame)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mse: f64,
    pub val_l1: f64,
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint_path: PathBuf,
    pub best_val_mse: f64,
    pub log: Vec<EpochLog>,
    pub diverged: bool,
}

/// Utterance-level validation metrics in inference mode: (MSE, L1).
pub fn validate(model: &mut Model, data: &LoadedDataset, batch_size: usize) -> Result<(f64, f64)> {
    let mut se = 0.0;
    let mut ae = 0.0;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(batch_size) {
        let x = data.batch(chunk);
        let (pred, _) = model.forward(x, false)?;
        for (slot, &i) in chunk.iter().enumerate() {
            let y = data.meta[i].distance_m;
            let yh = pred.utterance[slot];
            se += (y - yh) * (y - yh);
            ae += (y - yh).abs();
        }
    }
    let n = data.len() as f64;
    Ok((se / n, ae / n))
}

/// Run inference over a dataset and collect prediction records.
pub fn predict_dataset(
    model: &mut Model,
    data: &LoadedDataset,
    batch_size: usize,
) -> Result<Vec<PredictionRecord>> {
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut records = Vec::with_capacity(data.len());
    for chunk in indices.chunks(batch_size) {
        let x = data.batch(chunk);
        let (pred, _) = model.forward(x, false)?;
        for (slot, &i) in chunk.iter().enumerate() {
            let meta = &data.meta[i];
            records.push(PredictionRecord {
                clip_id: meta.clip_id.clone(),
                y: meta.distance_m,
                yhat: pred.utterance[slot],
                fold: meta.fold,
                snr_db: meta.snr_db,
                drr_db: meta.drr_db,
                framewise_path: None,
            });
        }
    }
    Ok(records)
}

fn write_log_csv(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "epoch,train_loss,val_mse,val_l1,lr").map_err(|e| Error::io(path, e))?;
    for row in log {
        writeln!(
            f,
            "{},{},{},{},{}",
            row.epoch, row.train_loss, row.val_mse, row.val_l1, row.lr
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Train a model, keeping the best-validation checkpoint at
/// `out_dir/best.ckpt` and the per-epoch log at `out_dir/train_log.csv`.
///
/// With `finetune_from`, weights and batch-norm statistics load from the
/// checkpoint and the optimizer restarts. A frame-count mismatch rebuilds
/// only the final utterance head (the other layers are frame-count agnostic).
pub fn train(
    train_set: &LoadedDataset,
    val_set: &LoadedDataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidInput("empty train or val split".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut model = match &train_cfg.finetune_from {
        None => {
            let mut cfg = model_cfg.clone();
            cfg.num_frames = train_set.num_frames;
            Model::new(cfg)?
        }
        Some(ckpt_path) => {
            let (mut m, _meta) = load_checkpoint(ckpt_path)?;
            if m.config.num_frames != train_set.num_frames {
                let mut cfg = m.config.clone();
                cfg.num_frames = train_set.num_frames;
                let mut head_rng = stream_rng(cfg.init_seed, 0xead);
                m.replace_head(UtteranceHead::new(&mut head_rng, train_set.num_frames), cfg);
            }
            m
        }
    };
    if model.config.input_channels != train_set.subset {
        return Err(Error::InvalidConfig(format!(
            "model expects {:?} channels but the dataset was loaded as {:?}",
            model.config.input_channels, train_set.subset
        )));
    }

    let ckpt_path = out_dir.join("best.ckpt");
    let mut sched = PlateauScheduler::new(
        train_cfg.learning_rate,
        train_cfg.lr_decay_factor,
        train_cfg.plateau_patience_epochs,
    );
    let mut adam = Adam::new(train_cfg.learning_rate);
    let mut log: Vec<EpochLog> = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut diverged = false;

    // Pre-training validation; on finetune this reproduces the checkpoint's
    // recorded metric when the validation split is unchanged.
    let (val_mse, val_l1) = validate(&mut model, val_set, train_cfg.batch_size)?;
    log.push(EpochLog {
        epoch: 0,
        train_loss: f64::NAN,
        val_mse,
        val_l1,
        lr: train_cfg.learning_rate,
    });
    let (_, improved) = sched.observe(val_mse);
    if improved {
        best_val = val_mse;
        save_checkpoint(
            &ckpt_path,
            &model,
            &TrainingState {
                epoch: 0,
                learning_rate: train_cfg.learning_rate,
                best_val_mse: best_val,
            },
        )?;
    }

    'epochs: for epoch in 1..=train_cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut stream_rng(train_cfg.seed, 0xe90c + epoch as u64));
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(train_cfg.batch_size) {
            let x = train_set.batch(chunk);
            let targets = train_set.targets(chunk);
            let (pred, _) = model.forward(x, true)?;
            let l = match batch_loss(&pred, &targets) {
                Ok(l) if l.is_finite() => l,
                _ => {
                    diverged = true;
                    break 'epochs;
                }
            };
            epoch_loss += l * chunk.len() as f64;
            seen += chunk.len();
            let (g_utt, g_frame) = batch_loss_grads(&pred, &targets);
            model.zero_grads();
            model.backward(&g_utt, &g_frame);
            clip_global_norm(&mut model, train_cfg.grad_clip_norm);
            adam.step(&mut model);
        }
        let train_loss = epoch_loss / seen as f64;
        let (val_mse, val_l1) = validate(&mut model, val_set, train_cfg.batch_size)?;
        let (lr, improved) = sched.observe(val_mse);
        adam.lr = lr;
        log.push(EpochLog {
            epoch,
            train_loss,
            val_mse,
            val_l1,
            lr,
        });
        if improved {
            best_val = val_mse;
            save_checkpoint(
                &ckpt_path,
                &model,
                &TrainingState {
                    epoch,
                    learning_rate: lr,
                    best_val_mse: best_val,
                },
            )?;
        }
    }

    write_log_csv(&out_dir.join("train_log.csv"), &log)?;
    Ok(TrainOutcome {
        checkpoint_path: ckpt_path,
        best_val_mse: best_val,
        log,
        diverged,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnrFamilyIndex {
    /// SNR -> checkpoint path, for every dataset that existed.
    pub entries: Vec<(f64, PathBuf)>,
    pub skipped: Vec<f64>,
}

/// Train one model per SNR from per-SNR dataset manifests. Missing datasets
/// are skipped and reported in the index.
pub fn train_snr_family(
    datasets: &[(f64, PathBuf)],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    subset: crate::features::ChannelSubset,
    fold: Option<usize>,
    out_dir: &Path,
) -> Result<SnrFamilyIndex> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut index = SnrFamilyIndex {
        entries: Vec::new(),
        skipped: Vec::new(),
    };
    for (snr, manifest_path) in datasets {
        if !manifest_path.exists() {
            index.skipped.push(*snr);
            continue;
        }
        let manifest = crate::scenegen::read_manifest(manifest_path)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let train_set = load_split(&manifest, base, crate::scenegen::Split::Train, fold, subset)?;
        let val_set = load_split(&manifest, base, crate::scenegen::Split::Val, fold, subset)?;
        let run_dir = out_dir.join(format!("snr_{snr}"));
        let outcome = train(&train_set, &val_set, model_cfg, train_cfg, &run_dir)?;
        index.entries.push((*snr, outcome.checkpoint_path));
    }
    let index_path = out_dir.join("family.json");
    std::fs::write(&index_path, serde_json::to_vec_pretty(&index)?)
        .map_err(|e| Error::io(&index_path, e))?;
    Ok(index)
}
