//! JSON-lines dataset manifests: one header record, then one entry per line.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Either a direct split label or, for cross-validated datasets, the fold
/// chunk the entry belongs to (it is the test chunk of that fold).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Assignment {
    Split(Split),
    Fold { fold: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realism {
    Synthetic,
    Hybrid,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    /// Audio path relative to the manifest's directory.
    pub clip_path: String,
    pub distance_m: f64,
    pub assignment: Assignment,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rt60_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub room_id: Option<String>,
    /// Shared RIR identity for leakage checks on hybrid builds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rir_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Sidecar JSON with full scene geometry, when one was written.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sidecar_path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestHeader {
    schema_version: u32,
    realism: Realism,
    config_hash: String,
    num_folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    peak_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub realism: Realism,
    pub config_hash: String,
    /// Present for fold-assigned datasets.
    pub num_folds: Option<usize>,
    /// Peak level convolved clips were normalized to before noise mixing,
    /// recorded so the gain-handling convention stays auditable.
    pub peak_norm: Option<f64>,
    pub entries: Vec<DatasetEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.clip_path) {
                return Err(Error::InvalidInput(format!(
                    "duplicate clip path in manifest: {}",
                    e.clip_path
                )));
            }
            if !(e.distance_m > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{}: non-positive distance {}",
                    e.clip_path, e.distance_m
                )));
            }
            match (e.assignment, self.num_folds) {
                (Assignment::Fold { fold }, Some(n)) if fold >= n => {
                    return Err(Error::InvalidInput(format!(
                        "{}: fold {fold} out of range 0..{n}",
                        e.clip_path
                    )));
                }
                (Assignment::Fold { .. }, None) => {
                    return Err(Error::InvalidInput(
                        "fold-assigned entry in a manifest without folds".into(),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Entries of one split. For fold-based manifests the fold index selects
    /// the rotation: test = chunk `fold`, val = chunk `fold+1`, train = rest.
    pub fn split_entries(&self, split: Split, fold: Option<usize>) -> Result<Vec<&DatasetEntry>> {
        match self.num_folds {
            None => Ok(self
                .entries
                .iter()
                .filter(|e| matches!(e.assignment, Assignment::Split(s) if s == split))
                .collect()),
            Some(n) => {
                let f = fold.ok_or_else(|| {
                    Error::InvalidConfig(
                        "this manifest is fold-assigned; a fold index is required".into(),
                    )
                })?;
                if f >= n {
                    return Err(Error::InvalidConfig(format!("fold {f} out of range 0..{n}")));
                }
                let val_chunk = (f + 1) % n;
                Ok(self
                    .entries
                    .iter()
                    .filter(|e| {
                        let chunk = match e.assignment {
                            Assignment::Fold { fold } => fold,
                            _ => return false,
                        };
                        match split {
                            Split::Test => chunk == f,
                            Split::Val => chunk == val_chunk,
                            Split::Train => chunk != f && chunk != val_chunk,
                        }
                    })
                    .collect())
            }
        }
    }
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    manifest.validate()?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let header = ManifestHeader {
        schema_version: MANIFEST_SCHEMA_VERSION,
        realism: manifest.realism,
        config_hash: manifest.config_hash.clone(),
        num_folds: manifest.num_folds,
        peak_norm: manifest.peak_norm,
    };
    writeln!(f, "{}", serde_json::to_string(&header)?).map_err(|e| Error::io(path, e))?;
    for e in &manifest.entries {
        writeln!(f, "{}", serde_json::to_string(e)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty manifest", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let header: ManifestHeader = serde_json::from_str(&header_line)?;
    if header.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "{}: manifest schema {} unsupported (expected {MANIFEST_SCHEMA_VERSION})",
            path.display(),
            header.schema_version
        )));
    }
    let mut entries = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line)?);
    }
    let manifest = DatasetManifest {
        realism: header.realism,
        config_hash: header.config_hash,
        num_folds: header.num_folds,
        peak_norm: header.peak_norm,
        entries,
    };
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(path: &str, assignment: Assignment) -> DatasetEntry {
        DatasetEntry {
            clip_path: path.to_string(),
            distance_m: 2.0,
            assignment,
            snr_db: None,
            rt60_s: Some(0.5),
            drr_db: None,
            room_id: None,
            rir_id: None,
            seed: Some(3),
            sidecar_path: None,
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let manifest = DatasetManifest {
            realism: Realism::Synthetic,
            config_hash: "abc123".into(),
            peak_norm: None,
            num_folds: Some(5),
            entries: (0..10)
                .map(|i| entry(&format!("clips/{i}.wav"), Assignment::Fold { fold: i / 2 }))
                .collect(),
        };
        write_manifest(&path, &manifest).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn duplicate_paths_rejected() {
        let manifest = DatasetManifest {
            realism: Realism::Hybrid,
            config_hash: "x".into(),
            peak_norm: None,
            num_folds: None,
            entries: vec![
                entry("a.wav", Assignment::Split(Split::Train)),
                entry("a.wav", Assignment::Split(Split::Test)),
            ],
        };
        assert!(manifest.validate().is_err());
    }

    #[test]
    fn fold_rotation_sizes() {
        let manifest = DatasetManifest {
            realism: Realism::Synthetic,
            config_hash: "x".into(),
            peak_norm: None,
            num_folds: Some(5),
            entries: (0..10)
                .map(|i| entry(&format!("{i}.wav"), Assignment::Fold { fold: i / 2 }))
                .collect(),
        };
        let train = manifest.split_entries(Split::Train, Some(0)).unwrap();
        let val = manifest.split_entries(Split::Val, Some(0)).unwrap();
        let test = manifest.split_entries(Split::Test, Some(0)).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (6, 2, 2));
    }

    #[test]
    fn every_entry_tests_exactly_once_across_folds() {
        let manifest = DatasetManifest {
            realism: Realism::Synthetic,
            config_hash: "x".into(),
            peak_norm: None,
            num_folds: Some(5),
            entries: (0..25)
                .map(|i| entry(&format!("{i}.wav"), Assignment::Fold { fold: i / 5 }))
                .collect(),
        };
        let mut test_count = std::collections::HashMap::new();
        for f in 0..5 {
            for e in manifest.split_entries(Split::Test, Some(f)).unwrap() {
                *test_count.entry(e.clip_path.clone()).or_insert(0) += 1;
            }
        }
        assert_eq!(test_count.len(), 25);
        assert!(test_count.values().all(|&c| c == 1));
    }
}
