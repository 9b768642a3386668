//! Mono audio clips and WAV I/O.
//!
//! Everything downstream runs at 16 kHz; clips read from disk are mixed down
//! to mono and resampled on ingestion. Files are written as 32-bit float WAV.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

pub const SAMPLE_RATE_HZ: u32 = 16_000;

#[derive(Debug, Clone)]
pub struct AudioClip {
    pub sample_rate_hz: u32,
    pub samples: Vec<f64>,
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, source_id: impl Into<String>) -> Self {
        AudioClip {
            sample_rate_hz: SAMPLE_RATE_HZ,
            samples,
            source_id: source_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Mean power over the full signal.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Scale so the absolute peak sits at `target`; silent clips pass through.
    pub fn peak_normalize(&mut self, target: f64) {
        let peak = self.peak();
        if peak > 0.0 {
            let g = target / peak;
            for s in &mut self.samples {
                *s *= g;
            }
        }
    }

    /// Truncate or zero-pad at the end to exactly `len` samples.
    pub fn fit_to_length(&mut self, len: usize) {
        self.samples.resize(len, 0.0);
    }
}

/// Read a WAV file, mix to mono, and resample to 16 kHz.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let raw: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let mut mono = Vec::with_capacity(raw.len() / channels);
    for frame in raw.chunks_exact(channels) {
        mono.push(frame.iter().sum::<f64>() / channels as f64);
    }
    let samples = if spec.sample_rate == SAMPLE_RATE_HZ {
        mono
    } else {
        resample(&mono, spec.sample_rate, SAMPLE_RATE_HZ)
    };
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(AudioClip::new(samples, source_id))
}

/// Write as mono 32-bit float WAV at the clip's sample rate.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &clip.samples {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Windowed-sinc rational resampler (63-tap Hann kernel per output sample).
pub fn resample(input: &[f64], from_hz: u32, to_hz: u32) -> Vec<f64> {
    if from_hz == to_hz || input.is_empty() {
        return input.to_vec();
    }
    let ratio = from_hz as f64 / to_hz as f64;
    let out_len = (input.len() as f64 / ratio).floor() as usize;
    // When downsampling, the kernel cutoff drops to the output Nyquist.
    let cutoff = if ratio > 1.0 { 1.0 / ratio } else { 1.0 };
    let half_taps = 31i64;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = i as f64 * ratio;
        let base = center.floor() as i64;
        let mut acc = 0.0;
        for k in -half_taps..=half_taps {
            let idx = base + k;
            if idx < 0 || idx >= input.len() as i64 {
                continue;
            }
            let t = idx as f64 - center;
            let x = PI * cutoff * t;
            let sinc = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
            let w = 0.5 * (1.0 + (PI * t / (half_taps as f64 + 1.0)).cos());
            acc += input[idx as usize] * cutoff * sinc * w;
        }
        out.push(acc);
    }
    out
}
