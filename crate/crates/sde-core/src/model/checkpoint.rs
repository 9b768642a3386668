//! Checkpoint container: every weight, the model config, the feature
//! extraction hash, batch-norm running statistics, and training state in one
//! self-describing file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig};
use crate::container::{Container, ContainerWriter};
use crate::error::{Error, Result};
use crate::features::extraction_config_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub epoch: usize,
    pub learning_rate: f64,
    pub best_val_mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model_config: ModelConfig,
    pub training_state: TrainingState,
    pub extraction_hash: String,
}

pub fn save_checkpoint(path: &Path, model: &Model, state: &TrainingState) -> Result<()> {
    let meta = CheckpointMeta {
        model_config: model.config.clone(),
        training_state: state.clone(),
        extraction_hash: extraction_config_hash(),
    };
    let mut w = ContainerWriter::new("checkpoint", serde_json::to_value(&meta)?);
    model.for_each_param(&mut |name, shape, values| {
        w.add_tensor(name, shape, values);
    });
    model.for_each_state(&mut |name, shape, values| {
        w.add_tensor(name, shape, values);
    });
    w.write(path)
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointMeta)> {
    let c = Container::read(path)?;
    if c.kind() != "checkpoint" {
        return Err(Error::Checkpoint(format!(
            "{}: not a checkpoint container",
            path.display()
        )));
    }
    let meta: CheckpointMeta = serde_json::from_value(c.meta().clone())?;
    if meta.extraction_hash != extraction_config_hash() {
        return Err(Error::Checkpoint(format!(
            "{}: trained on features from a different extraction config ({})",
            path.display(),
            meta.extraction_hash
        )));
    }
    let mut model = Model::new(meta.model_config.clone())?;
    let mut missing: Vec<String> = Vec::new();
    model.for_each_param_mut(&mut |name, values, _| {
        match c.tensor(name) {
            Ok((_, data)) if data.len() == values.len() => values.copy_from_slice(&data),
            _ => missing.push(name.to_string()),
        }
    });
    model.for_each_state_mut(&mut |name, values| {
        match c.tensor(name) {
            Ok((_, data)) if data.len() == values.len() => values.copy_from_slice(&data),
            _ => missing.push(name.to_string()),
        }
    });
    if !missing.is_empty() {
        return Err(Error::Checkpoint(format!(
            "{}: missing or mismatched tensors: {}",
            path.display(),
            missing.join(", ")
        )));
    }
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AttentionMode;
    use ndarray::Array4;
    use rand::Rng;

    #[test]
    fn checkpoint_round_trip_reproduces_outputs_bit_exactly() {
        let cfg = ModelConfig {
            conv_filters: [2, 3, 4],
            attention_filters: [2, 3],
            recurrent_width: 4,
            head_width: 4,
            num_frames: 5,
            num_recurrent_layers: 1,
            ..Default::default()
        };
        let mut model = Model::new(cfg.clone()).unwrap();
        let mut rng = crate::rng::stream_rng(77, 0);
        let x = Array4::from_shape_vec(
            (1, 3, 5, 257),
            (0..3 * 5 * 257).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        // One training pass perturbs batch-norm running stats.
        let _ = model.forward(x.clone(), true).unwrap();
        let (before, _) = model.forward(x.clone(), false).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let state = TrainingState {
            epoch: 3,
            learning_rate: 8e-4,
            best_val_mse: 1.25,
        };
        save_checkpoint(&path, &model, &state).unwrap();
        let (mut restored, meta) = load_checkpoint(&path).unwrap();
        assert_eq!(meta.training_state, state);
        assert_eq!(meta.model_config, cfg);
        let (after, _) = restored.forward(x, false).unwrap();
        assert_eq!(
            before.utterance[0].to_bits(),
            after.utterance[0].to_bits()
        );
        for (a, b) in before.framewise.iter().zip(after.framewise.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wrong_kind_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        let w = crate::container::ContainerWriter::new("features", serde_json::json!({}));
        w.write(&path).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn attention_state_round_trips() {
        let cfg = ModelConfig {
            conv_filters: [2, 3, 4],
            attention_filters: [2, 3],
            recurrent_width: 4,
            head_width: 4,
            num_frames: 5,
            attention_mode: AttentionMode::AllChannels,
            ..Default::default()
        };
        let model = Model::new(cfg).unwrap();
        let mut names = Vec::new();
        model.for_each_state(&mut |name, _, _| names.push(name.to_string()));
        assert!(names.iter().any(|n| n.contains("attention.bn1")));
    }
}
