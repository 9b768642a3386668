//! Randomized scene sampling: room dimensions, per-surface materials, and a
//! source/mic pair at a target distance.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::materials::{MaterialTable, SurfaceClass};
use super::{RoomSpec, SceneSpec, Vec3, ELEVATION_LIMIT_DEG, WALL_MARGIN_M};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSamplingConfig {
    pub dims_min: [f64; 3],
    pub dims_max: [f64; 3],
    pub distance_range_m: [f64; 2],
    /// When set, the mic is drawn from the central horizontal fraction of
    /// the floor plan instead of the whole interior.
    pub mic_central_fraction: Option<f64>,
    pub max_position_attempts: u32,
    pub max_room_attempts: u32,
}

impl Default for SceneSamplingConfig {
    fn default() -> Self {
        SceneSamplingConfig {
            dims_min: [3.0, 3.0, 2.5],
            dims_max: [10.0, 10.0, 4.5],
            distance_range_m: [1.0, 14.0],
            mic_central_fraction: None,
            max_position_attempts: 200,
            max_room_attempts: 500,
        }
    }
}

impl SceneSamplingConfig {
    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            if !(self.dims_min[i] > 0.0 && self.dims_max[i] >= self.dims_min[i]) {
                return Err(Error::InvalidConfig(format!(
                    "room dimension range {i} invalid: [{}, {}]",
                    self.dims_min[i], self.dims_max[i]
                )));
            }
        }
        let [dmin, dmax] = self.distance_range_m;
        if !(dmin > 0.0 && dmax >= dmin) {
            return Err(Error::InvalidConfig(format!(
                "distance range invalid: [{dmin}, {dmax}]"
            )));
        }
        if let Some(f) = self.mic_central_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "mic_central_fraction {f} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Sample one scene. Deterministic in `seed`; uniform room dims, one random
/// material per surface class (all four walls share the wall draw), uniform
/// azimuth, elevation within +-35 degrees, and distance uniform over the
/// requested range subject to both endpoints fitting in the room.
pub fn sample_scene(
    seed: u64,
    config: &SceneSamplingConfig,
    table: &MaterialTable,
) -> Result<SceneSpec> {
    config.validate()?;
    table.validate()?;
    let mut rng = stream_rng(seed, 0x5ce4e);
    let floors: Vec<_> = table.of_class(SurfaceClass::Floor).collect();
    let walls: Vec<_> = table.of_class(SurfaceClass::Wall).collect();
    let ceilings: Vec<_> = table.of_class(SurfaceClass::Ceiling).collect();
    let [d_min, d_max] = config.distance_range_m;
    let elev_limit = ELEVATION_LIMIT_DEG.to_radians();

    for _ in 0..config.max_room_attempts {
        let mut dims = [0.0; 3];
        for i in 0..3 {
            dims[i] = rng.gen_range(config.dims_min[i]..=config.dims_max[i]);
        }
        let floor = floors[rng.gen_range(0..floors.len())].clone();
        let ceiling = ceilings[rng.gen_range(0..ceilings.len())].clone();
        let wall = walls[rng.gen_range(0..walls.len())].clone();
        let room = RoomSpec {
            dims,
            materials: [
                floor,
                ceiling,
                wall.clone(),
                wall.clone(),
                wall.clone(),
                wall,
            ],
        };

        // Longest span of the feasible interior box; rooms that cannot even
        // hold d_min are resampled immediately.
        let span = |i: usize| dims[i] - 2.0 * WALL_MARGIN_M;
        let diag = (span(0).powi(2) + span(1).powi(2) + span(2).powi(2)).sqrt();
        if diag < d_min {
            continue;
        }

        // Mic sampling box: the whole interior, or a central patch of it.
        let mic_lo = |i: usize| match config.mic_central_fraction {
            Some(f) if i < 2 => (dims[i] * (1.0 - f) / 2.0).max(WALL_MARGIN_M),
            _ => WALL_MARGIN_M,
        };
        let mic_hi = |i: usize| match config.mic_central_fraction {
            Some(f) if i < 2 => (dims[i] * (1.0 + f) / 2.0).min(dims[i] - WALL_MARGIN_M),
            _ => dims[i] - WALL_MARGIN_M,
        };

        for _ in 0..config.max_position_attempts {
            let d = rng.gen_range(d_min..d_max.max(d_min + f64::EPSILON));
            let mic = Vec3::new(
                rng.gen_range(mic_lo(0)..=mic_hi(0)),
                rng.gen_range(mic_lo(1)..=mic_hi(1)),
                rng.gen_range(mic_lo(2)..=mic_hi(2)),
            );
            let azimuth = rng.gen_range(0.0..std::f64::consts::TAU);
            let elevation = rng.gen_range(-elev_limit..=elev_limit);
            let src = Vec3::new(
                mic.x + d * elevation.cos() * azimuth.cos(),
                mic.y + d * elevation.cos() * azimuth.sin(),
                mic.z + d * elevation.sin(),
            );
            let inside = src.x >= WALL_MARGIN_M
                && src.x <= dims[0] - WALL_MARGIN_M
                && src.y >= WALL_MARGIN_M
                && src.y <= dims[1] - WALL_MARGIN_M
                && src.z >= WALL_MARGIN_M
                && src.z <= dims[2] - WALL_MARGIN_M;
            if inside {
                let scene = SceneSpec::new(room, src, mic, seed);
                scene.validate()?;
                return Ok(scene);
            }
        }
    }
    Err(Error::SamplingFailed(format!(
        "no feasible source/mic placement for distances [{d_min}, {d_max}] m after {} room draws",
        config.max_room_attempts
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roomsim::eyring_rt60_s;

    #[test]
    fn same_seed_same_scene() {
        let table = MaterialTable::bundled();
        let cfg = SceneSamplingConfig::default();
        let a = sample_scene(99, &cfg, &table).unwrap();
        let b = sample_scene(99, &cfg, &table).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distances_stay_in_range() {
        let table = MaterialTable::bundled();
        let cfg = SceneSamplingConfig::default();
        for seed in 0..200 {
            let s = sample_scene(seed, &cfg, &table).unwrap();
            assert!(s.distance_m >= 1.0 && s.distance_m < 14.0, "{}", s.distance_m);
            assert!(s.elevation_deg().abs() <= 35.0 + 1e-9);
            s.validate().unwrap();
        }
    }

    #[test]
    fn infeasible_distance_range_fails_with_diagnostic() {
        let table = MaterialTable::bundled();
        let cfg = SceneSamplingConfig {
            distance_range_m: [50.0, 60.0],
            ..Default::default()
        };
        let err = sample_scene(1, &cfg, &table).unwrap_err();
        assert!(err.to_string().contains("50"));
    }

    #[test]
    fn rt60_distribution_brackets_target() {
        // Cheap version of the 10k-scene acceptance check (full run in the
        // acceptance suite).
        let table = MaterialTable::bundled();
        let cfg = SceneSamplingConfig::default();
        let mut rts: Vec<f64> = (0..1500)
            .map(|seed| eyring_rt60_s(&sample_scene(seed, &cfg, &table).unwrap().room))
            .collect();
        rts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = rts[rts.len() / 2];
        let p90 = rts[rts.len() * 9 / 10];
        assert!(
            (0.55..=1.15).contains(&median),
            "median {median}, p90 {p90}"
        );
        assert!(p90 > 1.4, "p90 {p90}");
    }
}
