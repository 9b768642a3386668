use std::time::Instant;

use sde_core::features::ChannelSubset;
use sde_core::model::ModelConfig;
use sde_core::roomsim::RirOptions;
use sde_core::scenegen::{build_synthetic_dataset, Split, SyntheticConfig};
use sde_core::training::{load_split, predict_dataset, train, TrainConfig};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let config = SyntheticConfig {
        num_scenes: 300,
        duration_s: 4.0,
        folds: 10,
        seed: 2024,
        sampling: sde_core::roomsim::SceneSamplingConfig {
            dims_min: [11.0, 11.0, 2.8],
            dims_max: [13.0, 13.0, 3.5],
            mic_central_fraction: Some(0.5),
            ..Default::default()
        },
        rir: RirOptions {
            max_image_count: 400_000,
            max_length_s: 1.2,
            ..Default::default()
        },
        ..Default::default()
    };
    let (manifest, _) = build_synthetic_dataset(&config, dir.path()).unwrap();
    println!("dataset 300x2s built in {:?}", t0.elapsed());

    let t1 = Instant::now();
    let subset = ChannelSubset::All;
    let train_set = load_split(&manifest, dir.path(), Split::Train, Some(0), subset).unwrap();
    let val_set = load_split(&manifest, dir.path(), Split::Val, Some(0), subset).unwrap();
    let test_set = load_split(&manifest, dir.path(), Split::Test, Some(0), subset).unwrap();
    println!(
        "features in {:?}: {}/{}/{} clips, T={}",
        t1.elapsed(),
        train_set.len(),
        val_set.len(),
        test_set.len(),
        train_set.num_frames
    );

    let model_cfg = ModelConfig {
        init_seed: 9,
        ..ModelConfig::default()
    }
    .at_half_width();
    let train_cfg = TrainConfig {
        epochs: 30,
        seed: 77,
        ..Default::default()
    };
    let t2 = Instant::now();
    let outcome = train(
        &train_set,
        &val_set,
        &model_cfg,
        &train_cfg,
        &dir.path().join("run"),
    )
    .unwrap();
    println!("train 20 epochs in {:?}", t2.elapsed());
    for row in &outcome.log {
        println!(
            "epoch {:3}  train_loss {:10.4}  val_mse {:8.4}  val_l1 {:6.3}  lr {:.2e}",
            row.epoch, row.train_loss, row.val_mse, row.val_l1, row.lr
        );
    }
    let (mut model, _) = sde_core::model::load_checkpoint(&outcome.checkpoint_path).unwrap();
    let records = predict_dataset(&mut model, &test_set, 16).unwrap();
    let model_l1 =
        records.iter().map(|r| (r.y - r.yhat).abs()).sum::<f64>() / records.len() as f64;
    let train_mean = train_set.meta.iter().map(|m| m.distance_m).sum::<f64>()
        / train_set.len() as f64;
    let baseline_l1 = test_set
        .meta
        .iter()
        .map(|m| (m.distance_m - train_mean).abs())
        .sum::<f64>()
        / test_set.len() as f64;
    println!(
        "test L1 {model_l1:.3} m, mean-predictor baseline {baseline_l1:.3} m, ratio {:.3} (need <= 0.6)",
        model_l1 / baseline_l1
    );
    println!("total {:?}", t0.elapsed());
}
