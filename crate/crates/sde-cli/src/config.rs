//! Declarative experiment configuration. One document drives dataset builds,
//! training, evaluation, ablation grids, and cross-corpus runs; unknown keys
//! are rejected everywhere, and scalar fields can be overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sde_core::evaluation::CiMode;
use sde_core::features::ChannelSubset;
use sde_core::model::{AttentionMode, KernelShape, ModelConfig};
use sde_core::scenegen::{HybridConfig, RealIngestConfig, SyntheticConfig};
use sde_core::training::TrainConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Synthetic,
    Hybrid,
    Real,
    /// Use an existing manifest without building anything.
    Manifest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub hybrid: Option<HybridConfig>,
    #[serde(default)]
    pub real: Option<RealIngestConfig>,
    /// Path to a pre-built manifest (kind = manifest), relative to the
    /// config file's directory.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Fold rotation used for fold-assigned manifests.
    pub fold: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            train: TrainConfig::default(),
            fold: Some(0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Half-open [a, b) distance bins in meters.
    pub bins: Vec<(f64, f64)>,
    pub ci_mode: CiMode,
    pub drr_bin_width_db: f64,
    pub distance_bin_width_m: f64,
    /// Checkpoint to evaluate; defaults to the train command's output.
    pub checkpoint: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            bins: vec![(1.0, 2.0), (2.0, 4.0), (4.0, 8.0), (8.0, 14.0)],
            ci_mode: CiMode::PerSample,
            drr_bin_width_db: 2.0,
            distance_bin_width_m: 1.0,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRow {
    #[serde(default)]
    pub label: Option<String>,
    pub kernel_shape: KernelShape,
    pub num_recurrent_layers: usize,
    #[serde(default = "default_attention")]
    pub attention_mode: AttentionMode,
    #[serde(default = "default_channels")]
    pub input_channels: ChannelSubset,
}

fn default_attention() -> AttentionMode {
    AttentionMode::AllChannels
}

fn default_channels() -> ChannelSubset {
    ChannelSubset::All
}

impl GridRow {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            format!(
                "{:?}-gru{}-att_{:?}-feat_{:?}",
                self.kernel_shape,
                self.num_recurrent_layers,
                self.attention_mode,
                self.input_channels
            )
            .to_lowercase()
        })
    }

    pub fn apply(&self, base: &ModelConfig) -> ModelConfig {
        ModelConfig {
            kernel_shape: self.kernel_shape,
            num_recurrent_layers: self.num_recurrent_layers,
            attention_mode: self.attention_mode,
            input_channels: self.input_channels,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateSection {
    pub grid: Vec<GridRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRef {
    pub name: String,
    /// Manifest path, relative to the config file's directory.
    pub manifest: PathBuf,
    #[serde(default)]
    pub fold: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossCorpusSection {
    pub corpora: Vec<CorpusRef>,
    pub finetune: bool,
}

impl Default for CrossCorpusSection {
    fn default() -> Self {
        CrossCorpusSection {
            corpora: Vec::new(),
            finetune: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub dataset: Option<DatasetSection>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub ablate: Option<AblateSection>,
    #[serde(default)]
    pub crosscorpus: Option<CrossCorpusSection>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .with_context(|| format!("invalid JSON config {}", path.display()))?,
            _ => serde_yaml::from_str(&text)
                .with_context(|| format!("invalid YAML config {}", path.display()))?,
        };
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            bail!(
                "{}: config schema_version {} unsupported (expected {CONFIG_SCHEMA_VERSION})",
                path.display(),
                config.schema_version
            );
        }
        // Anchor relative paths at the config file's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        config.rebase(base);
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(ds) = &mut self.dataset {
            if let Some(s) = &mut ds.synthetic {
                s.speech_dir.iter_mut().for_each(|p| fix(p));
                s.noise_dir.iter_mut().for_each(|p| fix(p));
                s.material_table.iter_mut().for_each(|p| fix(p));
            }
            if let Some(h) = &mut ds.hybrid {
                fix(&mut h.rir_csv);
                h.speech_dir.iter_mut().for_each(|p| fix(p));
                h.noise_dir.iter_mut().for_each(|p| fix(p));
            }
            if let Some(r) = &mut ds.real {
                fix(&mut r.annotations_dir);
                fix(&mut r.audio_dir);
            }
            ds.manifest.iter_mut().for_each(|p| fix(p));
        }
        self.train.train.finetune_from.iter_mut().for_each(|p| fix(p));
        self.eval.checkpoint.iter_mut().for_each(|p| fix(p));
        if let Some(cc) = &mut self.crosscorpus {
            for c in &mut cc.corpora {
                fix(&mut c.manifest);
            }
        }
    }

    /// Apply command-line scalar overrides.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        out: Option<PathBuf>,
        finetune_from: Option<PathBuf>,
    ) {
        if let Some(s) = seed {
            self.seed = s;
            if let Some(ds) = &mut self.dataset {
                if let Some(sy) = &mut ds.synthetic {
                    sy.seed = s;
                }
                if let Some(h) = &mut ds.hybrid {
                    h.seed = s;
                }
                if let Some(r) = &mut ds.real {
                    r.seed = s;
                }
            }
            self.train.train.seed = s;
        }
        if let Some(o) = out {
            self.out_dir = o;
        }
        if let Some(f) = finetune_from {
            self.train.train.finetune_from = Some(f);
        }
    }

    /// Path of the dataset manifest this experiment reads.
    pub fn manifest_path(&self) -> Result<PathBuf> {
        let ds = self
            .dataset
            .as_ref()
            .context("config has no dataset section")?;
        Ok(match ds.kind {
            DatasetKind::Manifest => ds
                .manifest
                .clone()
                .context("dataset.kind = manifest requires dataset.manifest")?,
            _ => self.out_dir.join("dataset/manifest.jsonl"),
        })
    }
}
