//! Scene assembly primitives: reverberant convolution and SNR-calibrated
//! noise injection.

use rand::Rng;
use realfft::RealFftPlanner;

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::roomsim::Rir;

/// Full linear convolution of the dry clip with the RIR (length = dry + rir - 1).
pub fn convolve_scene(dry: &AudioClip, rir: &Rir) -> Result<AudioClip> {
    if dry.sample_rate_hz != rir.sample_rate_hz {
        return Err(Error::InvalidInput(format!(
            "sample rate mismatch: clip {} Hz vs rir {} Hz",
            dry.sample_rate_hz, rir.sample_rate_hz
        )));
    }
    if dry.is_empty() || dry.power() == 0.0 {
        return Err(Error::InvalidInput(format!(
            "dry clip {} is silent; upstream data fault",
            dry.source_id
        )));
    }
    let samples = fft_convolve(&dry.samples, &rir.taps);
    Ok(AudioClip {
        sample_rate_hz: dry.sample_rate_hz,
        samples,
        source_id: dry.source_id.clone(),
    })
}

pub(crate) fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let fft_len = out_len.next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);

    let mut pa = a.to_vec();
    pa.resize(fft_len, 0.0);
    let mut pb = b.to_vec();
    pb.resize(fft_len, 0.0);
    let mut sa = fft.make_output_vec();
    let mut sb = fft.make_output_vec();
    let mut scratch = fft.make_scratch_vec();
    fft.process_with_scratch(&mut pa, &mut sa, &mut scratch)
        .expect("fft length fixed");
    fft.process_with_scratch(&mut pb, &mut sb, &mut scratch)
        .expect("fft length fixed");
    for (x, y) in sa.iter_mut().zip(&sb) {
        *x *= y;
    }
    let mut out = ifft.make_output_vec();
    let mut scratch_inv = ifft.make_scratch_vec();
    ifft.process_with_scratch(&mut sa, &mut out, &mut scratch_inv)
        .expect("ifft length fixed");
    out.truncate(out_len);
    let norm = 1.0 / fft_len as f64;
    for v in &mut out {
        *v *= norm;
    }
    out
}

/// Add a random segment of `noise` to `clean` at the requested SNR.
///
/// The gain is sqrt(P_clean / (P_noise * 10^(snr/10))) with powers measured
/// over the full signals, so the achieved SNR is exact by construction.
/// An infinite `snr_db` returns the clean clip unchanged.
pub fn mix_noise(clean: &AudioClip, noise: &AudioClip, snr_db: f64, seed: u64) -> Result<AudioClip> {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(clean.clone());
    }
    if noise.len() < clean.len() {
        return Err(Error::InvalidInput(format!(
            "noise ({} samples) shorter than clean ({} samples)",
            noise.len(),
            clean.len()
        )));
    }
    let p_clean = clean.power();
    if p_clean == 0.0 {
        return Err(Error::InvalidInput("clean clip has zero power".into()));
    }
    let mut rng = stream_rng(seed, 0x11015e);
    let max_offset = noise.len() - clean.len();
    let offset = if max_offset == 0 {
        0
    } else {
        rng.gen_range(0..=max_offset)
    };
    let segment = &noise.samples[offset..offset + clean.len()];
    let p_noise = segment.iter().map(|s| s * s).sum::<f64>() / segment.len() as f64;
    if p_noise == 0.0 {
        return Err(Error::InvalidInput("noise segment has zero power".into()));
    }
    let gain = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let samples = clean
        .samples
        .iter()
        .zip(segment)
        .map(|(c, n)| c + gain * n)
        .collect();
    Ok(AudioClip {
        sample_rate_hz: clean.sample_rate_hz,
        samples,
        source_id: clean.source_id.clone(),
    })
}
