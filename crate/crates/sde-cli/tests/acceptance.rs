//! Acceptance suite: one test per criterion, each printing a [PASS] line.
//! Run with `cargo test -p sde-cli --test acceptance -- --nocapture`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ndarray::Array4;
use rand::Rng;

use sde_core::audio::AudioClip;
use sde_core::evaluation::{binned_report, BinSpec, CiMode, EvalPair};
use sde_core::features::{extract_features, ChannelSubset};
use sde_core::model::{
    load_checkpoint, AttentionMode, KernelShape, Model, ModelConfig,
};
use sde_core::rng::stream_rng;
use sde_core::roomsim::{
    enumerate_images, estimate_rt60, eyring_rt60_s, sample_scene, synthesize_rir, Material,
    MaterialTable, RirOptions, RoomSpec, SceneSpec, SceneSamplingConfig, SurfaceClass, Vec3,
    RIR_SAMPLE_RATE_HZ, SPEED_OF_SOUND_M_S,
};
use sde_core::scenegen::speechgen::{generate_noise, generate_speech_like};
use sde_core::scenegen::{build_synthetic_dataset, mix_noise, Split, SyntheticConfig};
use sde_core::training::{
    batch_loss, batch_loss_grads, load_split, predict_dataset, train, TrainConfig,
};

fn pass(criterion: u32, detail: &str, t0: Instant) {
    println!(
        "[PASS] criterion {criterion}: {detail} ({:.1}s)",
        t0.elapsed().as_secs_f64()
    );
}

fn uniform_room(alpha: f64, dims: [f64; 3]) -> RoomSpec {
    let mk = |c: SurfaceClass| Material::uniform("u", c, alpha);
    RoomSpec {
        dims,
        materials: [
            mk(SurfaceClass::Floor),
            mk(SurfaceClass::Ceiling),
            mk(SurfaceClass::Wall),
            mk(SurfaceClass::Wall),
            mk(SurfaceClass::Wall),
            mk(SurfaceClass::Wall),
        ],
    }
}

#[test]
fn criterion_01_acoustic_physics() {
    let t0 = Instant::now();
    let table = MaterialTable::bundled();
    let sampling = SceneSamplingConfig::default();

    // Image-count law against a brute-force lattice enumeration oracle.
    let scene = sample_scene(1, &sampling, &table).unwrap();
    for n in 0..=4u32 {
        let images = enumerate_images(&scene, n).unwrap();
        let mut oracle = 0usize;
        let order = n as i64;
        for _ux in -order..=order {
            for _uy in -order..=order {
                for _uz in -order..=order {
                    oracle += 1;
                }
            }
        }
        assert_eq!(images.len(), oracle, "order {n}");
        assert_eq!(images.len(), (2 * n as usize + 1).pow(3));
    }

    // Direct-delay law on 100 random scenes: anechoic variant of each
    // sampled geometry puts its peak tap within one sample of d*fs/c.
    let fs = RIR_SAMPLE_RATE_HZ as f64;
    for seed in 0..100u64 {
        let s = sample_scene(seed, &sampling, &table).unwrap();
        let anechoic = SceneSpec::new(
            uniform_room(1.0, s.room.dims),
            s.source_pos,
            s.mic_pos,
            s.seed,
        );
        let expected = s.distance_m / SPEED_OF_SOUND_M_S * fs;
        let length_s = (expected + 200.0) / fs;
        let rir = synthesize_rir(&anechoic, 1, length_s).unwrap();
        assert!((rir.direct_delay_samples - expected).abs() <= 1.0);
        let peak = rir
            .taps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap()
            .0 as f64;
        assert!(
            (peak - expected).abs() <= 1.0,
            "seed {seed}: peak {peak} vs {expected}"
        );
    }

    // 1/d direct-amplitude law, exact integer delays (d and 2d).
    let near = SceneSpec::new(
        uniform_room(1.0, [12.0, 5.0, 3.0]),
        Vec3::new(1.0, 2.5, 1.5),
        Vec3::new(4.43, 2.5, 1.5),
        0,
    );
    let far = SceneSpec::new(
        uniform_room(1.0, [12.0, 5.0, 3.0]),
        Vec3::new(1.0, 2.5, 1.5),
        Vec3::new(7.86, 2.5, 1.5),
        0,
    );
    let rn = synthesize_rir(&near, 1, 0.1).unwrap();
    let rf = synthesize_rir(&far, 1, 0.1).unwrap();
    let ratio = rn.taps[160] / rf.taps[320];
    assert!((ratio - 2.0).abs() < 0.02, "amplitude ratio {ratio}");

    // Schroeder RT60 within 25% of the Eyring oracle on 10 uniform shoeboxes.
    // Compact rooms: the purely specular image model decays slower than the
    // diffuse-field Eyring prediction in proportion to the room's aspect
    // spread, so strongly flattened rooms sit outside the tolerance.
    let mut rng = stream_rng(42, 0);
    for i in 0..10 {
        let alpha = rng.gen_range(0.2..0.45);
        let dims = [
            rng.gen_range(4.0..7.0),
            rng.gen_range(4.0..7.0),
            rng.gen_range(3.0..4.0),
        ];
        let room = uniform_room(alpha, dims);
        let scene = SceneSpec::new(
            room.clone(),
            Vec3::new(dims[0] * 0.35, dims[1] * 0.35, 1.4),
            Vec3::new(dims[0] * 0.35 + 1.1, dims[1] * 0.35 + 0.9, 1.6),
            0,
        );
        let predicted = eyring_rt60_s(&room);
        let min_dim = dims.iter().cloned().fold(f64::INFINITY, f64::min);
        let order = (SPEED_OF_SOUND_M_S * predicted / min_dim).ceil() as u32 + 1;
        let rir = synthesize_rir(&scene, order, 1.3 * predicted + 0.05).unwrap();
        let measured = estimate_rt60(&rir.taps, RIR_SAMPLE_RATE_HZ).seconds;
        let rel = (measured - predicted).abs() / predicted;
        assert!(
            rel < 0.25,
            "room {i}: alpha {alpha:.2}, measured {measured:.3} vs Eyring {predicted:.3} (rel {rel:.3})"
        );
    }
    pass(1, "image count, direct delay, 1/d amplitude, Eyring RT60", t0);
}

#[test]
fn criterion_02_material_randomization_bracket() {
    let t0 = Instant::now();
    let table = MaterialTable::bundled();
    assert_eq!(table.combination_count(), 2912);
    let sampling = SceneSamplingConfig::default();
    let mut rts: Vec<f64> = (0..10_000u64)
        .map(|seed| eyring_rt60_s(&sample_scene(seed, &sampling, &table).unwrap().room))
        .collect();
    rts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = rts[rts.len() / 2];
    let p90 = rts[rts.len() * 9 / 10];
    assert!(
        (0.6..=1.1).contains(&median),
        "median RT60 {median:.3} outside [0.6, 1.1]"
    );
    assert!(p90 > 1.5, "90th percentile RT60 {p90:.3} not above 1.5");
    pass(
        2,
        &format!("10k scenes: median {median:.2} s, p90 {p90:.2} s"),
        t0,
    );
}

#[test]
fn criterion_03_snr_calibration() {
    let t0 = Instant::now();
    let mut rng = stream_rng(7, 0);
    let paper_list = [50.0, 40.0, 30.0, 20.0, 10.0, 5.0, 0.0];
    let mut cases: Vec<f64> = paper_list.to_vec();
    while cases.len() < 100 {
        cases.push(rng.gen_range(-5.0..50.0));
    }
    for (i, &snr) in cases.iter().enumerate() {
        let clean = generate_speech_like(1000 + i as u64, 1.0);
        let noise = generate_noise(2000 + i as u64, 1.5);
        let mixed = mix_noise(&clean, &noise, snr, 3000 + i as u64).unwrap();
        let added: Vec<f64> = mixed
            .samples
            .iter()
            .zip(&clean.samples)
            .map(|(m, c)| m - c)
            .collect();
        let p_added = added.iter().map(|v| v * v).sum::<f64>() / added.len() as f64;
        let measured = 10.0 * (clean.power() / p_added).log10();
        assert!(
            (measured - snr).abs() <= 0.01,
            "case {i}: requested {snr} dB, measured {measured} dB"
        );
    }
    pass(3, "100 mixes within 0.01 dB of requested SNR", t0);
}

#[test]
fn criterion_04_feature_suite() {
    let t0 = Instant::now();
    // Shape law for a 10 s clip.
    let ten_s = generate_speech_like(5, 10.0);
    assert_eq!(ten_s.len(), 160_000);
    let feat = extract_features(&ten_s).unwrap();
    assert_eq!((feat.num_frames(), feat.num_bins()), (624, 257));

    // Pythagorean identity everywhere.
    for t in 0..feat.num_frames() {
        for f in 0..feat.num_bins() {
            let s = feat.data[[t, f, 1]];
            let c = feat.data[[t, f, 2]];
            assert!((s * s + c * c - 1.0).abs() < 1e-6);
        }
    }

    // Hop-shift covariance.
    let clip = generate_speech_like(6, 1.0);
    let mut shifted = vec![0.0; 256];
    shifted.extend_from_slice(&clip.samples);
    let fa = extract_features(&clip).unwrap();
    let fb = extract_features(&AudioClip::new(shifted, "s")).unwrap();
    for t in 0..fa.num_frames() - 1 {
        for f in 0..257 {
            for c in 0..3 {
                assert!((fa.data[[t, f, c]] - fb.data[[t + 1, f, c]]).abs() < 1e-5);
            }
        }
    }

    // Amplitude scaling: magnitude scales, phase channels fixed.
    let scaled = AudioClip::new(clip.samples.iter().map(|s| s * 3.0).collect(), "k");
    let fk = extract_features(&scaled).unwrap();
    for t in 0..fa.num_frames() {
        for f in 0..257 {
            let ma = fa.data[[t, f, 0]];
            let mk = fk.data[[t, f, 0]];
            assert!((mk - 3.0 * ma).abs() <= 1e-6 * mk.max(1.0));
            if ma > 1e-9 {
                assert!((fa.data[[t, f, 1]] - fk.data[[t, f, 1]]).abs() < 1e-6);
                assert!((fa.data[[t, f, 2]] - fk.data[[t, f, 2]]).abs() < 1e-6);
            }
        }
    }
    pass(4, "shapes, unit circle, hop covariance, scaling", t0);
}

#[test]
fn criterion_05_model_shape_grid() {
    let t0 = Instant::now();
    // 54 cells: 3 kernels x 3 recurrent depths x 3 attention modes x
    // 2 channel subsets (magnitude present in both).
    let t_len = 8;
    let mut cells = 0;
    for kernel in [KernelShape::Time, KernelShape::Square, KernelShape::Frequency] {
        for layers in [0usize, 1, 2] {
            for attention in [
                AttentionMode::None,
                AttentionMode::SpectrogramOnly,
                AttentionMode::AllChannels,
            ] {
                for subset in [ChannelSubset::All, ChannelSubset::MagnitudeOnly] {
                    let cfg = ModelConfig {
                        kernel_shape: kernel,
                        num_recurrent_layers: layers,
                        attention_mode: attention,
                        input_channels: subset,
                        conv_filters: [2, 3, 4],
                        attention_filters: [2, 3],
                        recurrent_width: 4,
                        head_width: 4,
                        num_frames: t_len,
                        init_seed: 1,
                        ..Default::default()
                    };
                    let mut model = Model::new(cfg).unwrap();
                    let c = subset.num_channels();
                    let mut rng = stream_rng(50, cells as u64);
                    let x = Array4::from_shape_vec(
                        (1, c, t_len, 257),
                        (0..c * t_len * 257).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    )
                    .unwrap();
                    let (pred, _) = model.forward(x, false).unwrap();
                    assert_eq!(pred.utterance.len(), 1);
                    assert_eq!(pred.framewise.dim(), (1, t_len));
                    assert!(pred.utterance[0].is_finite());
                    cells += 1;
                }
            }
        }
    }
    assert_eq!(cells, 54);

    // Default architecture size within 5% of the published 650k.
    let default_model = Model::new(ModelConfig::default()).unwrap();
    let params = default_model.num_params() as f64;
    assert!(
        (params - 650_000.0).abs() / 650_000.0 < 0.05,
        "default config has {params} parameters"
    );

    // Square kernels are strictly larger; time and frequency tie.
    for layers in [0usize, 1, 2] {
        let count = |k: KernelShape| {
            Model::new(ModelConfig {
                kernel_shape: k,
                num_recurrent_layers: layers,
                ..Default::default()
            })
            .unwrap()
            .num_params()
        };
        let (time, square, freq) = (
            count(KernelShape::Time),
            count(KernelShape::Square),
            count(KernelShape::Frequency),
        );
        assert!(square > freq);
        assert_eq!(time, freq);
    }
    pass(
        5,
        &format!("54 cells ok; default params {}", default_model.num_params()),
        t0,
    );
}

#[test]
fn criterion_06_gradient_check() {
    let t0 = Instant::now();
    let cfg = ModelConfig {
        conv_filters: [2, 3, 4],
        recurrent_width: 4,
        head_width: 4,
        num_frames: 6,
        num_bins: 257,
        num_recurrent_layers: 2,
        attention_mode: AttentionMode::AllChannels,
        attention_filters: [2, 3],
        init_seed: 77,
        ..Default::default()
    };
    let mut model = Model::new(cfg.clone()).unwrap();
    let mut rng = stream_rng(600, 0);
    let n = 2;
    let x = Array4::from_shape_vec(
        (n, 3, 6, 257),
        (0..n * 3 * 6 * 257)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    )
    .unwrap();
    let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();

    // Analytic gradients of the dual loss.
    let (pred, _) = model.forward(x.clone(), true).unwrap();
    let (gu, gf) = batch_loss_grads(&pred, &targets);
    model.zero_grads();
    model.backward(&gu, &gf);

    // Tensor sizes for flat-index addressing.
    let mut sizes = Vec::new();
    model.for_each_param(&mut |name, _, values| sizes.push((name.to_string(), values.len())));
    let total: usize = sizes.iter().map(|(_, l)| l).sum();

    let read_grad = |model: &mut Model, flat: usize| -> (String, f64, f64) {
        let mut remaining = flat;
        let mut out = (String::new(), 0.0, 0.0);
        let mut tensor_idx = 0;
        model.for_each_param_mut(&mut |name, values, grads| {
            if remaining < values.len() && out.0.is_empty() {
                out = (format!("{name}[{remaining}]"), values[remaining], grads[remaining]);
            }
            if remaining >= values.len() {
                remaining -= values.len();
            }
            tensor_idx += 1;
        });
        let _ = tensor_idx;
        out
    };
    let perturb = |model: &mut Model, flat: usize, delta: f64| {
        let mut remaining = flat;
        let mut done = false;
        model.for_each_param_mut(&mut |_, values, _| {
            if remaining < values.len() && !done {
                values[remaining] += delta;
                done = true;
            }
            if remaining >= values.len() {
                remaining -= values.len();
            }
        });
    };
    let eval_loss = |model: &mut Model| -> f64 {
        let (pred, _) = model.forward(x.clone(), true).unwrap();
        batch_loss(&pred, &targets).unwrap()
    };

    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let flat = rng.gen_range(0..total);
        let (name, theta, analytic) = read_grad(&mut model, flat);
        let h = 1e-5 * (1.0 + theta.abs());
        perturb(&mut model, flat, h);
        let lp = eval_loss(&mut model);
        perturb(&mut model, flat, -2.0 * h);
        let lm = eval_loss(&mut model);
        perturb(&mut model, flat, h);
        let numeric = (lp - lm) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-10);
        assert!(
            rel < 1e-3,
            "{name}: analytic {analytic:.6e} vs numeric {numeric:.6e} (rel {rel:.2e})"
        );
        worst = worst.max(rel);
    }
    pass(6, &format!("25 parameters, worst rel err {worst:.1e}"), t0);
}

#[test]
fn criterion_07_overfit_smoke() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
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
    // Memorization probe: train == val == all 16 clips.
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
    let train_set =
        load_split(&all, dir.path(), Split::Train, None, ChannelSubset::All).unwrap();
    let model_cfg = ModelConfig {
        conv_filters: [4, 8, 32],
        attention_filters: [4, 8],
        recurrent_width: 32,
        head_width: 32,
        num_recurrent_layers: 1,
        init_seed: 3,
        ..Default::default()
    };
    let train_cfg = TrainConfig {
        epochs: 200,
        seed: 5,
        ..Default::default()
    };
    let outcome = train(
        &train_set,
        &train_set,
        &model_cfg,
        &train_cfg,
        &dir.path().join("run"),
    )
    .unwrap();
    assert!(!outcome.diverged);
    let (mut model, _) = load_checkpoint(&outcome.checkpoint_path).unwrap();
    let records = predict_dataset(&mut model, &train_set, 16).unwrap();
    let l1 = records.iter().map(|r| (r.y - r.yhat).abs()).sum::<f64>() / records.len() as f64;
    assert!(l1 < 0.2, "training-set L1 {l1:.3} m not below 0.2 m");
    pass(7, &format!("16-clip memorization, train L1 {l1:.3} m"), t0);
}

#[test]
fn criterion_08_desk_scale_generalization() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    // 300 noiseless scenes, distances uniform 1-14 m, 240/30/30 split via a
    // 10-chunk rotation.
    let config = SyntheticConfig {
        num_scenes: 300,
        duration_s: 2.0,
        folds: 10,
        seed: 2024,
        rir: RirOptions {
            max_image_count: 120_000,
            max_length_s: 1.2,
            ..Default::default()
        },
        ..Default::default()
    };
    let (manifest, _) = build_synthetic_dataset(&config, dir.path()).unwrap();
    let subset = ChannelSubset::All;
    let train_set = load_split(&manifest, dir.path(), Split::Train, Some(0), subset).unwrap();
    let val_set = load_split(&manifest, dir.path(), Split::Val, Some(0), subset).unwrap();
    let test_set = load_split(&manifest, dir.path(), Split::Test, Some(0), subset).unwrap();
    assert_eq!((train_set.len(), val_set.len(), test_set.len()), (240, 30, 30));

    // Default architecture at half width.
    let model_cfg = ModelConfig {
        init_seed: 9,
        ..ModelConfig::default()
    }
    .at_half_width();
    let train_cfg = TrainConfig {
        epochs: 20,
        seed: 77,
        ..Default::default()
    };
    let outcome = train(
        &train_set,
        &val_set,
        &model_cfg,
        &train_cfg,
        &dir.path().join("run"),
    )
    .unwrap();
    assert!(!outcome.diverged);

    let (mut model, _) = load_checkpoint(&outcome.checkpoint_path).unwrap();
    let records = predict_dataset(&mut model, &test_set, 16).unwrap();
    let model_l1 =
        records.iter().map(|r| (r.y - r.yhat).abs()).sum::<f64>() / records.len() as f64;
    let train_mean =
        train_set.meta.iter().map(|m| m.distance_m).sum::<f64>() / train_set.len() as f64;
    let baseline_l1 = test_set
        .meta
        .iter()
        .map(|m| (m.distance_m - train_mean).abs())
        .sum::<f64>()
        / test_set.len() as f64;
    let ratio = model_l1 / baseline_l1;
    assert!(
        ratio <= 0.6,
        "test L1 {model_l1:.3} m vs mean-predictor {baseline_l1:.3} m: ratio {ratio:.3} > 0.6"
    );
    pass(
        8,
        &format!("test L1 {model_l1:.2} m vs baseline {baseline_l1:.2} m (ratio {ratio:.2})"),
        t0,
    );
}

#[test]
fn criterion_09_metric_and_report_oracles() {
    let t0 = Instant::now();
    let mut rng = stream_rng(900, 0);
    let bins = BinSpec::synthetic_default();

    // Binned aggregation matches a scalar-loop oracle exactly.
    let pairs: Vec<EvalPair> = (0..500)
        .map(|_| EvalPair::new(rng.gen_range(0.5..16.0), rng.gen_range(0.0..16.0)))
        .collect();
    let report = binned_report(&pairs, &bins, CiMode::PerSample).unwrap();
    for (idx, &(a, b)) in bins.edges.iter().enumerate() {
        let members: Vec<&EvalPair> = pairs.iter().filter(|p| p.y >= a && p.y < b).collect();
        if members.is_empty() {
            continue;
        }
        let mut l1_sum = 0.0;
        let mut rl1_sum = 0.0;
        for p in &members {
            l1_sum += (p.y - p.yhat).abs();
            rl1_sum += (p.y - p.yhat).abs() / p.y;
        }
        let row = report
            .bins
            .iter()
            .find(|r| r.label == bins.label(idx))
            .expect("bin present");
        assert_eq!(row.count, members.len());
        assert_eq!(row.l1.mean, l1_sum / members.len() as f64);
        assert_eq!(row.rl1.mean, rl1_sum / members.len() as f64);
    }

    // Aggregation consistency to 1e-9.
    let weighted: f64 = report
        .bins
        .iter()
        .chain(report.other.iter())
        .map(|b| b.count as f64 * b.l1.mean)
        .sum();
    assert!((weighted - report.average.count as f64 * report.average.l1.mean).abs() < 1e-9);

    // Monte-Carlo CI oracle: errors = |N(0, sigma)|; the per-sample CI
    // half-width must sit within 10% of 1.96 sigma_err / sqrt(n).
    let sigma = 0.5f64;
    let n = 1000;
    let mc_pairs: Vec<EvalPair> = (0..n)
        .map(|_| {
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let gauss = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            EvalPair::new(5.0, 5.0 + sigma * gauss)
        })
        .collect();
    let mc = binned_report(&mc_pairs, &bins, CiMode::PerSample).unwrap();
    let sigma_err = sigma * (1.0 - 2.0 / std::f64::consts::PI).sqrt();
    let analytic = 1.96 * sigma_err / (n as f64).sqrt();
    let rel = (mc.average.l1.ci95 - analytic).abs() / analytic;
    assert!(
        rel < 0.10,
        "CI half-width {:.5} vs analytic {analytic:.5} (rel {rel:.3})",
        mc.average.l1.ci95
    );
    pass(9, "scalar-loop aggregation, consistency, CI vs analytic", t0);
}

// ---- criterion 10: harness structure through the real binary ----

fn write_tiny_dataset_config(dir: &Path) -> std::path::PathBuf {
    let config = dir.join("base.yaml");
    std::fs::write(
        &config,
        r#"schema_version: 1
seed: 7
out_dir: work
dataset:
  kind: synthetic
  synthetic:
    num_scenes: 12
    duration_s: 0.7
    folds: 4
    seed: 7
    rir:
      max_image_count: 30000
      max_length_s: 0.4
model:
  conv_filters: [3, 6, 12]
  attention_filters: [3, 4]
  recurrent_width: 8
  head_width: 8
train:
  epochs: 1
  fold: 0
eval:
  ci_mode: per_sample
"#,
    )
    .unwrap();
    config
}

fn sde() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sde"))
}

#[test]
fn criterion_10_harness_fidelity() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let base = write_tiny_dataset_config(dir.path());
    let status = sde()
        .args(["generate", "--config"])
        .arg(&base)
        .status()
        .unwrap();
    assert!(status.success());

    // Ablation grid with the 9-row architecture structure.
    let arch_yaml = dir.path().join("arch.yaml");
    let mut grid = String::from(
        r#"schema_version: 1
seed: 7
out_dir: arch_out
dataset:
  kind: manifest
  manifest: work/dataset/manifest.jsonl
model:
  conv_filters: [3, 6, 12]
  attention_filters: [3, 4]
  recurrent_width: 8
  head_width: 8
train:
  epochs: 1
  fold: 0
eval:
  ci_mode: per_sample
ablate:
  grid:
"#,
    );
    for kernel in ["time", "square", "frequency"] {
        for layers in [0, 1, 2] {
            grid.push_str(&format!(
                "    - {{ kernel_shape: {kernel}, num_recurrent_layers: {layers} }}\n"
            ));
        }
    }
    std::fs::write(&arch_yaml, grid).unwrap();
    let status = sde().args(["ablate", "--config"]).arg(&arch_yaml).status().unwrap();
    assert!(status.success(), "architecture grid run failed");
    let table = std::fs::read_to_string(dir.path().join("arch_out/ablate/ablation.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).filter(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 9, "expected 9 architecture rows");
    for kernel in ["time", "square", "frequency"] {
        for layers in [0, 1, 2] {
            assert!(
                rows.iter()
                    .any(|r| r.contains(kernel) && r.split(',').nth(2) == Some(&layers.to_string())),
                "missing row {kernel}/{layers}"
            );
        }
    }

    // Attention ablation with the 3-row structure.
    let att_yaml = dir.path().join("att.yaml");
    std::fs::write(
        &att_yaml,
        r#"schema_version: 1
seed: 7
out_dir: att_out
dataset:
  kind: manifest
  manifest: work/dataset/manifest.jsonl
model:
  conv_filters: [3, 6, 12]
  attention_filters: [3, 4]
  recurrent_width: 8
  head_width: 8
train:
  epochs: 1
  fold: 0
eval:
  ci_mode: per_sample
ablate:
  grid:
    - { kernel_shape: frequency, num_recurrent_layers: 1, attention_mode: none }
    - { kernel_shape: frequency, num_recurrent_layers: 1, attention_mode: spectrogram_only }
    - { kernel_shape: frequency, num_recurrent_layers: 1, attention_mode: all_channels }
"#,
    )
    .unwrap();
    let status = sde().args(["ablate", "--config"]).arg(&att_yaml).status().unwrap();
    assert!(status.success(), "attention grid run failed");
    let table = std::fs::read_to_string(dir.path().join("att_out/ablate/ablation.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).filter(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 3, "expected 3 attention rows");
    for mode in ["none", "spectrogramonly", "allchannels"] {
        assert!(rows.iter().any(|r| r.contains(mode)), "missing {mode} row");
    }

    // Cross-corpus: 3 corpora -> full 3x3 matrix, diagonal equal to
    // in-corpus evaluation.
    let cross_yaml = dir.path().join("cross.yaml");
    std::fs::write(
        &cross_yaml,
        r#"schema_version: 1
seed: 7
out_dir: cross_out
model:
  conv_filters: [3, 6, 12]
  attention_filters: [3, 4]
  recurrent_width: 8
  head_width: 8
train:
  epochs: 1
  fold: 0
eval:
  ci_mode: per_sample
crosscorpus:
  corpora:
    - { name: alpha, manifest: work/dataset/manifest.jsonl, fold: 0 }
    - { name: beta, manifest: work/dataset/manifest.jsonl, fold: 1 }
    - { name: gamma, manifest: work/dataset/manifest.jsonl, fold: 2 }
"#,
    )
    .unwrap();
    let status = sde()
        .args(["crosscorpus", "--config"])
        .arg(&cross_yaml)
        .status()
        .unwrap();
    assert!(status.success(), "crosscorpus run failed");
    let matrix_text =
        std::fs::read_to_string(dir.path().join("cross_out/crosscorpus/matrix.csv")).unwrap();
    let lines: Vec<&str> = matrix_text.lines().collect();
    assert_eq!(lines.len(), 4, "header plus three rows");
    let names = ["alpha", "beta", "gamma"];
    let mut matrix = std::collections::HashMap::new();
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 4);
        for (j, name) in names.iter().enumerate() {
            let v: f64 = cells[j + 1].parse().expect("full matrix");
            matrix.insert((cells[0].to_string(), name.to_string()), v);
        }
    }
    assert_eq!(matrix.len(), 9, "expected a full 3x3 matrix");

    // Diagonal must equal an independent in-corpus evaluation of the same
    // checkpoint on the same test split.
    let manifest =
        sde_core::scenegen::read_manifest(&dir.path().join("work/dataset/manifest.jsonl"))
            .unwrap();
    for (i, name) in names.iter().enumerate() {
        let ckpt = dir
            .path()
            .join(format!("cross_out/crosscorpus/train_{name}/best.ckpt"));
        let (mut model, _) = load_checkpoint(&ckpt).unwrap();
        let test_set = load_split(
            &manifest,
            &dir.path().join("work/dataset"),
            Split::Test,
            Some(i),
            ChannelSubset::All,
        )
        .unwrap();
        let records = predict_dataset(&mut model, &test_set, 16).unwrap();
        let l1 =
            records.iter().map(|r| (r.y - r.yhat).abs()).sum::<f64>() / records.len() as f64;
        let cell = matrix[&(name.to_string(), name.to_string())];
        assert!(
            (cell - l1).abs() < 1e-12,
            "{name}: diagonal {cell} vs in-corpus {l1}"
        );
    }
    pass(10, "9-row and 3-row grids, full 3x3 matrix with exact diagonal", t0);
}
