//! Acoustic descriptors: Schroeder RT60, direct-to-reverberant ratio, and the
//! Eyring closed-form prediction.

use super::materials::NUM_BANDS;
use super::RoomSpec;

/// Half-width of the direct-sound window used by the DRR, in seconds.
const DRR_WINDOW_HALF_S: f64 = 0.0025;

#[derive(Debug, Clone, Copy)]
pub struct Rt60Estimate {
    pub seconds: f64,
    /// Decay span in dB the line was actually fitted on (nominally 20).
    pub fit_span_db: f64,
    /// True when less than the nominal -5..-25 dB span was available.
    pub degraded: bool,
}

/// RT60 from the Schroeder backward-integrated energy decay curve: a line is
/// fitted on the -5..-25 dB span (T20) and extrapolated to 60 dB.
pub fn estimate_rt60(taps: &[f64], sample_rate_hz: u32) -> Rt60Estimate {
    let zero = Rt60Estimate {
        seconds: 0.0,
        fit_span_db: 0.0,
        degraded: true,
    };
    let total: f64 = taps.iter().map(|t| t * t).sum();
    if taps.is_empty() || total <= 0.0 {
        return zero;
    }
    // Backward integration, normalized to the full energy.
    let mut edc_db = Vec::with_capacity(taps.len());
    let mut acc = 0.0;
    for &t in taps.iter().rev() {
        acc += t * t;
        edc_db.push(10.0 * (acc / total).log10());
    }
    edc_db.reverse();

    let start = match edc_db.iter().position(|&v| v <= -5.0) {
        Some(i) => i,
        None => return zero,
    };
    let nominal_end = edc_db.iter().position(|&v| v <= -25.0);
    let (end, degraded) = match nominal_end {
        Some(i) => (i, false),
        None => {
            // Whole tail never reaches -25 dB; fit the widest usable span.
            let last = edc_db
                .iter()
                .rposition(|v| v.is_finite())
                .unwrap_or(edc_db.len() - 1);
            (last, true)
        }
    };
    if end <= start + 1 {
        return zero;
    }

    // Least-squares line on (time, level).
    let fs = sample_rate_hz as f64;
    let n = (end - start + 1) as f64;
    let mut st = 0.0;
    let mut sv = 0.0;
    let mut stt = 0.0;
    let mut stv = 0.0;
    for i in start..=end {
        let t = i as f64 / fs;
        let v = edc_db[i];
        st += t;
        sv += v;
        stt += t * t;
        stv += t * v;
    }
    let denom = n * stt - st * st;
    if denom <= 0.0 {
        return zero;
    }
    let slope = (n * stv - st * sv) / denom;
    if slope >= 0.0 {
        return zero;
    }
    let span = edc_db[start] - edc_db[end];
    Rt60Estimate {
        seconds: -60.0 / slope,
        fit_span_db: span,
        degraded: degraded || span < 19.0,
    }
}

/// 10 log10(E_direct / E_reverb), direct window +-2.5 ms around the direct
/// arrival. Returns +inf when there is no reverberant energy.
pub fn compute_drr(taps: &[f64], direct_delay_samples: f64, sample_rate_hz: u32) -> f64 {
    let half = (DRR_WINDOW_HALF_S * sample_rate_hz as f64).round() as i64;
    let center = direct_delay_samples.round() as i64;
    let lo = (center - half).max(0) as usize;
    let hi = ((center + half) as usize).min(taps.len().saturating_sub(1));
    let direct: f64 = taps[lo..=hi.max(lo)].iter().map(|t| t * t).sum();
    let total: f64 = taps.iter().map(|t| t * t).sum();
    let reverb = total - direct;
    if reverb <= total * 1e-12 {
        return f64::INFINITY;
    }
    10.0 * (direct / reverb).log10()
}

/// Eyring RT60 per octave band: 0.161 V / (-S ln(1 - mean_alpha)).
pub fn eyring_rt60_bands(room: &RoomSpec) -> [f64; NUM_BANDS] {
    let areas = room.surface_areas();
    let total_area: f64 = areas.iter().sum();
    let volume = room.volume();
    let mut out = [0.0; NUM_BANDS];
    for (b, slot) in out.iter_mut().enumerate() {
        let mean_alpha = room
            .materials
            .iter()
            .zip(&areas)
            .map(|(m, &a)| m.absorption[b] * a)
            .sum::<f64>()
            / total_area;
        *slot = if mean_alpha >= 1.0 {
            0.0
        } else {
            0.161 * volume / (-total_area * (1.0 - mean_alpha).ln())
        };
    }
    out
}

/// Scalar Eyring RT60: mean of the 500 Hz and 1 kHz bands.
pub fn eyring_rt60_s(room: &RoomSpec) -> f64 {
    let bands = eyring_rt60_bands(room);
    0.5 * (bands[2] + bands[3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roomsim::materials::{Material, SurfaceClass};
    use rand::Rng;

    #[test]
    fn exponential_decay_recovers_known_rt60() {
        let fs = 16_000u32;
        let mut rng = crate::rng::stream_rng(11, 0);
        for &rt in &[0.3, 1.0, 2.0] {
            let n = (2.0 * rt * fs as f64) as usize;
            let taps: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64 / fs as f64;
                    (-6.91 * t / rt).exp() * rng.gen_range(-1.0..1.0)
                })
                .collect();
            let est = estimate_rt60(&taps, fs);
            assert!(
                (est.seconds - rt).abs() / rt < 0.05,
                "rt {rt}: estimated {}",
                est.seconds
            );
            assert!(!est.degraded);
        }
    }

    #[test]
    fn single_impulse_has_zero_rt60() {
        let mut taps = vec![0.0; 1000];
        taps[10] = 1.0;
        let est = estimate_rt60(&taps, 16_000);
        assert_eq!(est.seconds, 0.0);
        assert!(est.degraded);
    }

    #[test]
    fn rt60_is_scale_invariant() {
        let fs = 16_000u32;
        let mut rng = crate::rng::stream_rng(12, 0);
        let taps: Vec<f64> = (0..16_000)
            .map(|i| (-6.91 * i as f64 / fs as f64 / 0.7).exp() * rng.gen_range(-1.0..1.0))
            .collect();
        let scaled: Vec<f64> = taps.iter().map(|t| t * 37.5).collect();
        let a = estimate_rt60(&taps, fs);
        let b = estimate_rt60(&scaled, fs);
        assert!((a.seconds - b.seconds).abs() < 1e-9);
    }

    #[test]
    fn drr_sentinel_and_known_ratio() {
        let mut spike = vec![0.0; 1000];
        spike[100] = 1.0;
        assert!(compute_drr(&spike, 100.0, 16_000).is_infinite());

        // Direct energy 4x the tail: 10 log10(4) ~ 6.02 dB.
        let mut taps = vec![0.0; 2000];
        taps[100] = 2.0;
        taps[1000] = 1.0;
        let drr = compute_drr(&taps, 100.0, 16_000);
        assert!((drr - 6.0206).abs() < 1e-3, "drr {drr}");

        // Equal energies: 0 dB.
        let mut taps = vec![0.0; 2000];
        taps[100] = 1.0;
        taps[1000] = 1.0;
        assert!(compute_drr(&taps, 100.0, 16_000).abs() < 1e-9);
    }

    #[test]
    fn eyring_reference_value() {
        let mk = |c: SurfaceClass| Material::uniform("a03", c, 0.3);
        let room = RoomSpec {
            dims: [7.5, 9.0, 3.5],
            materials: [
                mk(SurfaceClass::Floor),
                mk(SurfaceClass::Ceiling),
                mk(SurfaceClass::Wall),
                mk(SurfaceClass::Wall),
                mk(SurfaceClass::Wall),
                mk(SurfaceClass::Wall),
            ],
        };
        // 0.161 * 236.25 / (250.5 * -ln(0.7)) = 0.4257...
        let rt = eyring_rt60_s(&room);
        assert!((rt - 0.4257).abs() < 1e-3, "rt {rt}");
    }
}
