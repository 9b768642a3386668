//! Image-source synthesis of shoebox room impulse responses.
//!
//! Images live on a per-axis 1-D lattice indexed by u in Z: even u mirrors
//! translate the source (u*L + s), odd u reflect it ((u+1)*L - s). A triple
//! (ux, uy, uz) with |u|inf <= n enumerates (2n+1)^3 images. Each image's
//! per-band pressure gain is the product of sqrt(1 - alpha) over every wall
//! hit; band gains are realized by a zero-phase filter bank whose triangular
//! responses interpolate linearly in log-frequency between octave centers and
//! sum to one, so an all-ones gain vector passes a pulse through unchanged.

use realfft::RealFftPlanner;

use super::acoustics::{compute_drr, estimate_rt60, eyring_rt60_s};
use super::materials::{BAND_CENTERS_HZ, NUM_BANDS};
use super::{Rir, SceneSpec, Surface, Vec3, RIR_SAMPLE_RATE_HZ, SPEED_OF_SOUND_M_S};
use crate::error::{Error, Result};

/// Half-width of the windowed-sinc fractional-delay kernel (81 taps total).
const SINC_HALF: i64 = 40;

/// Cutoff of the zero-phase high-pass applied after band merging. Dense
/// all-positive image impulses otherwise pile up unphysical energy near DC
/// that inflates the late tail (the classic image-method artifact).
const HIGHPASS_HZ: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct Image {
    pub position: Vec3,
    /// Cumulative pressure reflection gain per octave band.
    pub band_gains: [f64; NUM_BANDS],
}

/// Per-axis image position and wall-hit counts for lattice index `u`.
#[inline]
fn axis_image(u: i64, source: f64, dim: f64) -> (f64, u32, u32) {
    let q = u.rem_euclid(2);
    let m = (u + q) / 2;
    let pos = if q == 0 {
        2.0 * m as f64 * dim + source
    } else {
        2.0 * m as f64 * dim - source
    };
    ((pos), (m - q).unsigned_abs() as u32, m.unsigned_abs() as u32)
}

struct AxisImages {
    /// (position, per-band gain) for u in -order..=order.
    entries: Vec<(f64, [f64; NUM_BANDS])>,
    order: i64,
}

impl AxisImages {
    fn build(
        order: i64,
        source: f64,
        dim: f64,
        near_refl: &[f64; NUM_BANDS],
        far_refl: &[f64; NUM_BANDS],
    ) -> Self {
        let mut entries = Vec::with_capacity((2 * order + 1) as usize);
        for u in -order..=order {
            let (pos, near_hits, far_hits) = axis_image(u, source, dim);
            let mut gains = [0.0; NUM_BANDS];
            for b in 0..NUM_BANDS {
                gains[b] = near_refl[b].powi(near_hits as i32) * far_refl[b].powi(far_hits as i32);
            }
            entries.push((pos, gains));
        }
        AxisImages { entries, order }
    }

    fn get(&self, u: i64) -> &(f64, [f64; NUM_BANDS]) {
        &self.entries[(u + self.order) as usize]
    }
}

fn axis_images(scene: &SceneSpec, max_order: i64) -> [AxisImages; 3] {
    let room = &scene.room;
    let refl = |s: Surface| room.material(s).reflection();
    [
        AxisImages::build(
            max_order,
            scene.source_pos.x,
            room.dims[0],
            &refl(Surface::WallX0),
            &refl(Surface::WallX1),
        ),
        AxisImages::build(
            max_order,
            scene.source_pos.y,
            room.dims[1],
            &refl(Surface::WallY0),
            &refl(Surface::WallY1),
        ),
        AxisImages::build(
            max_order,
            scene.source_pos.z,
            room.dims[2],
            &refl(Surface::Floor),
            &refl(Surface::Ceiling),
        ),
    ]
}

/// Enumerate all (2*max_order+1)^3 images with |u|inf <= max_order.
pub fn enumerate_images(scene: &SceneSpec, max_order: u32) -> Result<Vec<Image>> {
    scene.validate()?;
    let order = max_order as i64;
    let [ax, ay, az] = axis_images(scene, order);
    let mut images = Vec::with_capacity((2 * order as usize + 1).pow(3));
    for ux in -order..=order {
        let (px, gx) = ax.get(ux);
        for uy in -order..=order {
            let (py, gy) = ay.get(uy);
            for uz in -order..=order {
                let (pz, gz) = az.get(uz);
                let mut band_gains = [0.0; NUM_BANDS];
                for b in 0..NUM_BANDS {
                    band_gains[b] = gx[b] * gy[b] * gz[b];
                }
                images.push(Image {
                    position: Vec3::new(*px, *py, *pz),
                    band_gains,
                });
            }
        }
    }
    Ok(images)
}

/// Triangular band-basis weights at `freq_hz`: linear interpolation of band
/// gains in log2(f) between octave centers, flat outside the extreme centers.
/// Weights sum to one at every frequency.
pub(crate) fn band_weights(freq_hz: f64) -> [(usize, f64); 2] {
    let centers = &BAND_CENTERS_HZ;
    if freq_hz <= centers[0] {
        return [(0, 1.0), (0, 0.0)];
    }
    if freq_hz >= centers[NUM_BANDS - 1] {
        return [(NUM_BANDS - 1, 1.0), (NUM_BANDS - 1, 0.0)];
    }
    let mut b = 0;
    while freq_hz > centers[b + 1] {
        b += 1;
    }
    let t = (freq_hz.log2() - centers[b].log2()) / (centers[b + 1].log2() - centers[b].log2());
    [(b, 1.0 - t), (b + 1, t)]
}

/// 81-tap Hann-windowed sinc kernel for a fractional delay. Fills `taps` for
/// sample indices lo..=hi (clamped to the buffer) and returns (lo, count).
/// One sin and one cos seed the whole kernel: sin(pi(t+1)) = -sin(pi t) and
/// the window phase advances by a fixed rotation.
#[inline]
fn sinc_kernel(delay: f64, buf_len: usize, taps: &mut [f64]) -> (usize, usize) {
    let center = delay.round() as i64;
    let lo = (center - SINC_HALF).max(0);
    let hi = (center + SINC_HALF).min(buf_len as i64 - 1);
    if hi < lo {
        return (0, 0);
    }
    let t0 = lo as f64 - delay;
    let pi = std::f64::consts::PI;
    // Numerator of sinc: alternates sign as t steps by one.
    let mut num = (pi * t0).sin();
    // Hann window via rotation: w(t) = 0.5 (1 + cos(pi t / (H + 0.5))).
    let wstep = pi / (SINC_HALF as f64 + 0.5);
    let mut wc = (wstep * t0).cos();
    let mut ws = (wstep * t0).sin();
    let (dc, dsn) = (wstep.cos(), wstep.sin());
    let count = (hi - lo + 1) as usize;
    for (j, tap) in taps[..count].iter_mut().enumerate() {
        let t = t0 + j as f64;
        let sinc = if t.abs() < 1e-9 { 1.0 } else { num / (pi * t) };
        *tap = sinc * 0.5 * (1.0 + wc);
        num = -num;
        let wc_next = wc * dc - ws * dsn;
        ws = ws * dc + wc * dsn;
        wc = wc_next;
    }
    (lo as usize, count)
}

/// Zero-phase filter-bank merge: FFT each band buffer, weight by the band
/// basis response, sum, inverse FFT.
fn merge_bands(band_bufs: Vec<Vec<f64>>, n_taps: usize, fs: f64) -> Vec<f64> {
    let fft_len = (n_taps + 4096).next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);

    let num_bins = fft_len / 2 + 1;
    let mut acc = vec![realfft::num_complex::Complex::new(0.0, 0.0); num_bins];
    let mut spectrum = fft.make_output_vec();
    let mut scratch = fft.make_scratch_vec();
    for (b, buf) in band_bufs.into_iter().enumerate() {
        let mut padded = buf;
        padded.resize(fft_len, 0.0);
        fft.process_with_scratch(&mut padded, &mut spectrum, &mut scratch)
            .expect("fft length fixed");
        for (k, s) in spectrum.iter().enumerate() {
            let freq = k as f64 * fs / fft_len as f64;
            let w = band_weights(freq);
            let weight = w.iter().filter(|(i, _)| *i == b).map(|(_, v)| v).sum::<f64>();
            if weight != 0.0 {
                acc[k] += s * weight;
            }
        }
    }
    // Second-order high-pass magnitude, zero phase.
    for (k, a) in acc.iter_mut().enumerate() {
        let ratio = (k as f64 * fs / fft_len as f64 / HIGHPASS_HZ).powi(2);
        *a *= ratio / (1.0 + ratio * ratio).sqrt();
    }
    let mut out = ifft.make_output_vec();
    let mut scratch_inv = ifft.make_scratch_vec();
    ifft.process_with_scratch(&mut acc, &mut out, &mut scratch_inv)
        .expect("ifft length fixed");
    let norm = 1.0 / fft_len as f64;
    out.truncate(n_taps);
    for v in &mut out {
        *v *= norm;
    }
    out
}

/// Synthesize the omnidirectional RIR for a scene.
///
/// Every image whose arrival fits the buffer contributes an impulse at delay
/// dist/c with amplitude gain/dist per band. Images beyond `max_order` on the
/// lattice are not modeled; the `truncated` flag records when that (or the
/// buffer length) cuts the decay short of -60 dB.
pub fn synthesize_rir(scene: &SceneSpec, max_order: u32, length_s: f64) -> Result<Rir> {
    scene.validate()?;
    if !(length_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rir length {length_s} s must be positive"
        )));
    }
    let fs = RIR_SAMPLE_RATE_HZ as f64;
    let n_taps = (length_s * fs).ceil() as usize;
    let order = max_order as i64;
    let [ax, ay, az] = axis_images(scene, order);
    let mic = scene.mic_pos;
    let max_dist = (n_taps as f64 + SINC_HALF as f64) / fs * SPEED_OF_SOUND_M_S;

    let mut band_bufs = vec![vec![0.0f64; n_taps]; NUM_BANDS];
    for ux in -order..=order {
        let (px, gx) = ax.get(ux);
        let dx = px - mic.x;
        if dx.abs() > max_dist {
            continue;
        }
        for uy in -order..=order {
            let (py, gy) = ay.get(uy);
            let dy = py - mic.y;
            let dxy2 = dx * dx + dy * dy;
            if dxy2 > max_dist * max_dist {
                continue;
            }
            for uz in -order..=order {
                let (pz, gz) = az.get(uz);
                let dz = pz - mic.z;
                let dist = (dxy2 + dz * dz).sqrt();
                if dist > max_dist {
                    continue;
                }
                let delay = dist / SPEED_OF_SOUND_M_S * fs;
                let spread = 1.0 / dist.max(1e-2);
                let mut kernel = [0.0f64; 2 * SINC_HALF as usize + 1];
                let (lo, count) = sinc_kernel(delay, n_taps, &mut kernel);
                if count == 0 {
                    continue;
                }
                for b in 0..NUM_BANDS {
                    let g = gx[b] * gy[b] * gz[b] * spread;
                    if g != 0.0 {
                        for (dst, &tap) in band_bufs[b][lo..lo + count].iter_mut().zip(&kernel[..count]) {
                            *dst += g * tap;
                        }
                    }
                }
            }
        }
    }

    let taps = merge_bands(band_bufs, n_taps, fs);
    let direct_delay_samples = scene.distance_m / SPEED_OF_SOUND_M_S * fs;

    // Conservative decay coverage: the nearest unmodeled image sits at least
    // max_order * min_dim from the mic.
    let min_dim = scene.room.dims.iter().cloned().fold(f64::INFINITY, f64::min);
    let covered_s = (max_order as f64 * min_dim / SPEED_OF_SOUND_M_S).min(length_s);
    let rt60_pred = eyring_rt60_s(&scene.room);
    let truncated = covered_s < rt60_pred;

    let est = estimate_rt60(&taps, RIR_SAMPLE_RATE_HZ);
    let drr_db = compute_drr(&taps, direct_delay_samples, RIR_SAMPLE_RATE_HZ);
    Ok(Rir {
        sample_rate_hz: RIR_SAMPLE_RATE_HZ,
        taps,
        rt60_s: est.seconds,
        drr_db,
        direct_delay_samples,
        truncated,
        rt60_degraded: est.degraded,
    })
}

/// Resource bounds for automatic order/length selection.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RirOptions {
    /// RIR length as a multiple of the Eyring RT60 prediction.
    pub length_rt60_factor: f64,
    /// Hard cap on the RIR length in seconds.
    pub max_length_s: f64,
    /// Approximate budget on the number of images synthesized.
    pub max_image_count: u64,
    /// Hard cap on the lattice order.
    pub max_order: u32,
}

impl Default for RirOptions {
    fn default() -> Self {
        RirOptions {
            length_rt60_factor: 1.5,
            max_length_s: 2.5,
            max_image_count: 4_000_000,
            max_order: 200,
        }
    }
}

/// Pick the lattice order and length from the Eyring prediction, bounded by
/// the image budget, and synthesize.
pub fn synthesize_rir_auto(scene: &SceneSpec, opts: &RirOptions) -> Result<Rir> {
    scene.validate()?;
    let rt60 = eyring_rt60_s(&scene.room).max(0.05);
    let direct_s = scene.distance_m / SPEED_OF_SOUND_M_S;
    let length_s = (opts.length_rt60_factor * rt60 + direct_s + 0.02).min(opts.max_length_s);

    // Radius the image budget affords: image density is one per (V/8) octant
    // cell, 8 parities, so count ~ (4 pi / 3) r^3 / V.
    let volume = scene.room.volume();
    let r_budget = (3.0 * volume * opts.max_image_count as f64 / (4.0 * std::f64::consts::PI))
        .powf(1.0 / 3.0);
    let r_needed = SPEED_OF_SOUND_M_S * length_s;
    let radius = r_needed.min(r_budget);
    let min_dim = scene.room.dims.iter().cloned().fold(f64::INFINITY, f64::min);
    let order = ((radius / min_dim).ceil() as u32 + 1).min(opts.max_order);
    synthesize_rir(scene, order, length_s)
}
