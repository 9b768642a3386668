use std::time::Instant;

use sde_core::features::ChannelSubset;
use sde_core::model::{AttentionMode, ModelConfig};
use sde_core::roomsim::RirOptions;
use sde_core::scenegen::{build_synthetic_dataset, Split, SyntheticConfig};
use sde_core::training::{load_split, predict_dataset, train, TrainConfig};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let config = SyntheticConfig {
        num_scenes: 16,
        duration_s: 1.0,
        folds: 4,
        seed: 11,
        rir: RirOptions {
            max_image_count: 100_000,
            max_length_s: 0.8,
            ..Default::default()
        },
        ..Default::default()
    };
    let (manifest, _) = build_synthetic_dataset(&config, dir.path()).unwrap();
    println!("dataset built in {:?}", t0.elapsed());

    // Train == val == all 16 clips (memorization probe).
    let all = sde_core::scenegen::DatasetManifest {
        num_folds: None,
        entries: manifest
            .entries
            .iter()
            .map(|e| sde_core::scenegen::DatasetEntry {
                assignment: sde_core::scenegen::Assignment::Split(Split::Train),
                ..e.clone()
            })
            .collect(),
        ..manifest
    };
    let t1 = Instant::now();
    let train_set = load_split(&all, dir.path(), Split::Train, None, ChannelSubset::All).unwrap();
    println!("features in {:?}, T={}", t1.elapsed(), train_set.num_frames);

    let model_cfg = ModelConfig {
        conv_filters: [4, 8, 32],
        attention_filters: [4, 8],
        recurrent_width: 32,
        head_width: 32,
        num_recurrent_layers: 1,
        attention_mode: AttentionMode::AllChannels,
        init_seed: 3,
        ..Default::default()
    };
    let train_cfg = TrainConfig {
        epochs: 200,
        seed: 5,
        ..Default::default()
    };
    let t2 = Instant::now();
    let outcome = train(&train_set, &train_set, &model_cfg, &train_cfg, &dir.path().join("run")).unwrap();
    println!("train 200 epochs in {:?} (diverged={})", t2.elapsed(), outcome.diverged);
    for row in outcome.log.iter().step_by(20) {
        println!(
            "epoch {:3}  train_loss {:10.4}  val_mse {:8.4}  val_l1 {:6.3}  lr {:.2e}",
            row.epoch, row.train_loss, row.val_mse, row.val_l1, row.lr
        );
    }
    let (mut model, _) = sde_core::model::load_checkpoint(&outcome.checkpoint_path).unwrap();
    let records = predict_dataset(&mut model, &train_set, 16).unwrap();
    let l1 = records.iter().map(|r| (r.y - r.yhat).abs()).sum::<f64>() / records.len() as f64;
    println!("final train L1 = {l1:.4} m (target < 0.2)");
}
