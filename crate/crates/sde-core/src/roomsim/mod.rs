//! Shoebox room acoustics: scene geometry, image-source impulse responses,
//! and derived descriptors (RT60, DRR, direct-path delay).

mod acoustics;
mod image_source;
pub mod materials;
mod sampling;

pub use acoustics::{compute_drr, estimate_rt60, eyring_rt60_bands, eyring_rt60_s, Rt60Estimate};
pub use image_source::{enumerate_images, synthesize_rir, synthesize_rir_auto, Image, RirOptions};
pub use materials::{Material, MaterialTable, SurfaceClass, BAND_CENTERS_HZ, NUM_BANDS};
pub use sampling::{sample_scene, SceneSamplingConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_SOUND_M_S: f64 = 343.0;
pub const RIR_SAMPLE_RATE_HZ: u32 = 16_000;

/// Minimum clearance between any source/mic position and a room surface.
pub const WALL_MARGIN_M: f64 = 0.1;

pub const ELEVATION_LIMIT_DEG: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dist(self, o: Vec3) -> f64 {
        self.sub(o).norm()
    }
}

/// Index order for the six surfaces of a shoebox room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Floor,
    Ceiling,
    WallX0,
    WallX1,
    WallY0,
    WallY1,
}

pub const SURFACES: [Surface; 6] = [
    Surface::Floor,
    Surface::Ceiling,
    Surface::WallX0,
    Surface::WallX1,
    Surface::WallY0,
    Surface::WallY1,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Interior dimensions (Lx, Ly, Lz) in meters.
    pub dims: [f64; 3],
    /// One material per surface, ordered as `SURFACES`.
    pub materials: [Material; 6],
}

impl RoomSpec {
    pub fn material(&self, surface: Surface) -> &Material {
        &self.materials[SURFACES.iter().position(|&s| s == surface).unwrap()]
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn surface_areas(&self) -> [f64; 6] {
        let [lx, ly, lz] = self.dims;
        [lx * ly, lx * ly, ly * lz, ly * lz, lx * lz, lx * lz]
    }

    pub fn total_surface_area(&self) -> f64 {
        self.surface_areas().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &d) in self.dims.iter().enumerate() {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidScene(format!(
                    "room dimension {i} must be positive, got {d}"
                )));
            }
        }
        for m in &self.materials {
            m.validate()?;
        }
        Ok(())
    }
}

/// One simulated acoustic configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: RoomSpec,
    pub source_pos: Vec3,
    pub mic_pos: Vec3,
    pub seed: u64,
    /// Euclidean source-mic distance in meters.
    pub distance_m: f64,
}

impl SceneSpec {
    pub fn new(room: RoomSpec, source_pos: Vec3, mic_pos: Vec3, seed: u64) -> Self {
        let distance_m = source_pos.dist(mic_pos);
        SceneSpec {
            room,
            source_pos,
            mic_pos,
            seed,
            distance_m,
        }
    }

    /// Elevation angle of the source relative to the mic, degrees.
    pub fn elevation_deg(&self) -> f64 {
        let d = self.source_pos.sub(self.mic_pos);
        let horiz = (d.x * d.x + d.y * d.y).sqrt();
        d.z.atan2(horiz).to_degrees()
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        for (label, p) in [("source", self.source_pos), ("mic", self.mic_pos)] {
            let [lx, ly, lz] = self.room.dims;
            let inside = p.x >= WALL_MARGIN_M
                && p.x <= lx - WALL_MARGIN_M
                && p.y >= WALL_MARGIN_M
                && p.y <= ly - WALL_MARGIN_M
                && p.z >= WALL_MARGIN_M
                && p.z <= lz - WALL_MARGIN_M;
            if !inside {
                return Err(Error::InvalidScene(format!(
                    "{label} position ({}, {}, {}) is not at least {WALL_MARGIN_M} m inside the {lx} x {ly} x {lz} room",
                    p.x, p.y, p.z
                )));
            }
        }
        let d = self.source_pos.dist(self.mic_pos);
        if (d - self.distance_m).abs() > 1e-9 {
            return Err(Error::InvalidScene(format!(
                "declared distance {} differs from geometric distance {d}",
                self.distance_m
            )));
        }
        if d <= 0.0 {
            return Err(Error::InvalidScene(
                "source and mic positions coincide".into(),
            ));
        }
        let elevation = self.elevation_deg();
        if elevation.abs() > ELEVATION_LIMIT_DEG + 1e-9 {
            return Err(Error::InvalidScene(format!(
                "source elevation {elevation:.1} deg outside +-{ELEVATION_LIMIT_DEG} deg"
            )));
        }
        Ok(())
    }
}

/// Sampled impulse response with derived acoustics.
#[derive(Debug, Clone)]
pub struct Rir {
    pub sample_rate_hz: u32,
    pub taps: Vec<f64>,
    pub rt60_s: f64,
    pub drr_db: f64,
    pub direct_delay_samples: f64,
    /// Set when the image order or length was too small to model the full
    /// decay down to -60 dB.
    pub truncated: bool,
    /// Set when the RT60 estimate had less than the nominal 20 dB fit span.
    pub rt60_degraded: bool,
}

impl Rir {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}
