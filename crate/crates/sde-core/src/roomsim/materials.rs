//! Surface materials with octave-band absorption coefficients.
//!
//! The bundled table carries coefficients from published acoustical
//! engineering tables, grouped by surface class. Sampling draws one floor, one
//! ceiling, and one wall material (shared by all four walls), giving
//! 14 x 13 x 16 = 2912 combinations with the default table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_BANDS: usize = 6;
pub const BAND_CENTERS_HZ: [f64; NUM_BANDS] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceClass {
    Floor,
    Wall,
    Ceiling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub surface: SurfaceClass,
    /// Absorption per octave band centered at `BAND_CENTERS_HZ`, each in [0,1].
    pub absorption: [f64; NUM_BANDS],
}

impl Material {
    pub fn uniform(name: &str, surface: SurfaceClass, alpha: f64) -> Self {
        Material {
            name: name.to_string(),
            surface,
            absorption: [alpha; NUM_BANDS],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &a) in self.absorption.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidConfig(format!(
                    "material {}: band {i} absorption {a} outside [0,1]",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Pressure reflection magnitude per band, sqrt(1 - alpha).
    pub fn reflection(&self) -> [f64; NUM_BANDS] {
        let mut r = [0.0; NUM_BANDS];
        for (r, &a) in r.iter_mut().zip(&self.absorption) {
            *r = (1.0 - a).sqrt();
        }
        r
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialTable {
    pub version: u32,
    pub bands_hz: [f64; NUM_BANDS],
    pub materials: Vec<Material>,
}

impl MaterialTable {
    /// The table bundled with the crate.
    pub fn bundled() -> Self {
        let table: MaterialTable =
            serde_json::from_str(include_str!("../../data/materials.json"))
                .expect("bundled material table parses");
        table.validate().expect("bundled material table is valid");
        table
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: MaterialTable = serde_json::from_str(&text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.materials.is_empty() {
            return Err(Error::InvalidConfig("material table is empty".into()));
        }
        for m in &self.materials {
            m.validate()?;
        }
        for class in [SurfaceClass::Floor, SurfaceClass::Wall, SurfaceClass::Ceiling] {
            if self.of_class(class).next().is_none() {
                return Err(Error::InvalidConfig(format!(
                    "material table has no {class:?} materials"
                )));
            }
        }
        Ok(())
    }

    pub fn of_class(&self, class: SurfaceClass) -> impl Iterator<Item = &Material> {
        self.materials.iter().filter(move |m| m.surface == class)
    }

    pub fn class_count(&self, class: SurfaceClass) -> usize {
        self.of_class(class).count()
    }

    /// Distinct (floor, wall, ceiling) assignments available to the sampler.
    pub fn combination_count(&self) -> usize {
        self.class_count(SurfaceClass::Floor)
            * self.class_count(SurfaceClass::Wall)
            * self.class_count(SurfaceClass::Ceiling)
    }
}
