//! Distance-annotated dataset construction at three realism levels:
//! simulated RIRs convolved with dry speech, measured RIRs convolved with dry
//! speech, and annotated real recordings.

mod hybrid;
mod manifest;
mod mix;
mod real;
pub mod speechgen;
mod stats;
mod synthetic;

pub use hybrid::{build_hybrid_dataset, HybridConfig};
pub use manifest::{
    read_manifest, write_manifest, Assignment, DatasetEntry, DatasetManifest, Realism, Split,
    MANIFEST_SCHEMA_VERSION,
};
pub use mix::{convolve_scene, mix_noise};
pub use real::{ingest_real_recordings, RealIngestConfig};
pub use stats::{dataset_stats, DatasetStats};
pub use synthetic::{build_synthetic_dataset, SyntheticConfig};

/// Per-build report of entries that had to be skipped and why.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct BuildReport {
    pub built: usize,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

impl BuildReport {
    pub fn warn(&mut self, msg: String) {
        self.skipped += 1;
        self.warnings.push(msg);
    }
}

/// Stable hash of a serializable generation config, recorded in manifests so
/// reruns and consumers can detect drift.
pub fn config_hash<T: serde::Serialize>(config: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
