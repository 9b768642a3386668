//! Bundled audio generators so the pipeline runs with zero external corpora:
//! a source-filter speech-like excitation (pulse train through random formant
//! resonators, with pauses and fricative bursts) and an environmental-noise
//! stand-in (pink-ish noise with slow level modulation).

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::audio::{AudioClip, SAMPLE_RATE_HZ};
use crate::rng::stream_rng;

/// Two-pole resonator at `freq` Hz with the given bandwidth.
struct Resonator {
    b0: f64,
    a1: f64,
    a2: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64) -> Self {
        let fs = SAMPLE_RATE_HZ as f64;
        let r = (-std::f64::consts::PI * bandwidth / fs).exp();
        let theta = 2.0 * std::f64::consts::PI * freq / fs;
        Resonator {
            b0: (1.0 - r * r) * 1.0,
            a1: -2.0 * r * theta.cos(),
            a2: r * r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.b0 * x - self.a1 * self.y1 - self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn voiced_segment(rng: &mut ChaCha12Rng, len: usize) -> Vec<f64> {
    let fs = SAMPLE_RATE_HZ as f64;
    let f0_base = rng.gen_range(85.0..240.0);
    let f1 = rng.gen_range(280.0..900.0);
    let f2 = rng.gen_range((f1 + 250.0)..2300.0);
    let f3 = rng.gen_range(2300.0..3400.0);
    let mut formants = [
        Resonator::new(f1, rng.gen_range(60.0..120.0)),
        Resonator::new(f2, rng.gen_range(70.0..140.0)),
        Resonator::new(f3, rng.gen_range(100.0..180.0)),
    ];
    let mut out = vec![0.0; len];
    let mut phase = 0.0;
    let mut f0 = f0_base;
    for (i, o) in out.iter_mut().enumerate() {
        // Slow pitch wander.
        if i % 160 == 0 {
            f0 = (f0 + rng.gen_range(-4.0f64..4.0)).clamp(0.7 * f0_base, 1.3 * f0_base);
        }
        phase += f0 / fs;
        let mut x = 0.0;
        if phase >= 1.0 {
            phase -= 1.0;
            x = 1.0;
        }
        // Glottal-ish excitation: impulse plus a touch of aspiration noise.
        x += 0.02 * rng.gen_range(-1.0..1.0);
        let mut y = x;
        for f in &mut formants {
            y = f.step(y);
        }
        // Attack/decay envelope.
        let pos = i as f64 / len as f64;
        let env = (pos / 0.08).min(1.0) * ((1.0 - pos) / 0.15).min(1.0);
        *o = y * env;
    }
    out
}

fn fricative_segment(rng: &mut ChaCha12Rng, len: usize) -> Vec<f64> {
    let mut filt = Resonator::new(rng.gen_range(3000.0..6000.0), rng.gen_range(600.0..1500.0));
    (0..len)
        .map(|i| {
            let pos = i as f64 / len as f64;
            let env = (pos / 0.2).min(1.0) * ((1.0 - pos) / 0.2).min(1.0);
            filt.step(rng.gen_range(-1.0..1.0)) * env * 0.3
        })
        .collect()
}

/// Deterministic speech-like clip of the requested duration.
pub fn generate_speech_like(seed: u64, duration_s: f64) -> AudioClip {
    let fs = SAMPLE_RATE_HZ as f64;
    let total = (duration_s * fs).round() as usize;
    let mut rng = stream_rng(seed, 0x5bee);
    let mut samples = Vec::with_capacity(total);
    // Lead-in pause so utterances do not all start at t = 0.
    let lead = (rng.gen_range(0.02..0.12) * fs) as usize;
    samples.resize(lead.min(total), 0.0);
    while samples.len() < total {
        let voiced = rng.gen_bool(0.8);
        let mut seg = if voiced {
            let len = (rng.gen_range(0.25..0.8) * fs) as usize;
            voiced_segment(&mut rng, len)
        } else {
            let len = (rng.gen_range(0.05..0.2) * fs) as usize;
            fricative_segment(&mut rng, len)
        };
        // Level each segment; raw resonator gain varies wildly with the
        // formant/harmonic alignment.
        let rms = (seg.iter().map(|s| s * s).sum::<f64>() / seg.len() as f64).sqrt();
        if rms > 0.0 {
            let target = rng.gen_range(0.08..0.2);
            let g = target / rms;
            for s in &mut seg {
                *s *= g;
            }
        }
        samples.extend_from_slice(&seg);
        let pause = (rng.gen_range(0.08..0.35) * fs) as usize;
        let remaining = total.saturating_sub(samples.len());
        samples.resize(samples.len() + pause.min(remaining), 0.0);
    }
    samples.truncate(total);
    let mut clip = AudioClip::new(samples, format!("speechlike-{seed:016x}"));
    clip.peak_normalize(0.9);
    clip
}

/// Deterministic environmental-noise stand-in: pink-ish spectrum with slow
/// amplitude modulation.
pub fn generate_noise(seed: u64, duration_s: f64) -> AudioClip {
    let fs = SAMPLE_RATE_HZ as f64;
    let total = (duration_s * fs).round() as usize;
    let mut rng = stream_rng(seed, 0x4015e);
    // Paul Kellet style pink filter state.
    let (mut b0, mut b1, mut b2) = (0.0f64, 0.0f64, 0.0f64);
    let mut level = 1.0f64;
    let mut samples = Vec::with_capacity(total);
    for i in 0..total {
        if i % 1600 == 0 {
            level = (level * rng.gen_range(0.85..1.18f64)).clamp(0.3, 2.0);
        }
        let white: f64 = rng.gen_range(-1.0..1.0);
        b0 = 0.99765 * b0 + white * 0.0990460;
        b1 = 0.96300 * b1 + white * 0.2965164;
        b2 = 0.57000 * b2 + white * 1.0526913;
        samples.push((b0 + b1 + b2 + white * 0.1848) * 0.2 * level);
    }
    let mut clip = AudioClip::new(samples, format!("noise-{seed:016x}"));
    clip.peak_normalize(0.9);
    clip
}
