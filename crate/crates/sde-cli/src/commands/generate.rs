use anyhow::{bail, Context, Result};

use sde_core::scenegen::{
    build_hybrid_dataset, build_synthetic_dataset, config_hash, ingest_real_recordings,
    read_manifest,
};

use super::{write_run_summary, Outcome, RunSummary};
use crate::config::{DatasetKind, ExperimentConfig};
use crate::CommonArgs;

pub fn run(args: &CommonArgs) -> Result<Outcome> {
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply_overrides(args.seed, args.out.clone(), None);
    let ds = config
        .dataset
        .as_ref()
        .context("generate requires a dataset section")?;
    let dataset_dir = config.out_dir.join("dataset");
    let manifest_path = dataset_dir.join("manifest.jsonl");

    // The builders embed a hash of their own config; a manifest carrying the
    // same hash means this exact build already exists.
    let expected_hash = match ds.kind {
        DatasetKind::Synthetic => {
            let c = ds
                .synthetic
                .as_ref()
                .context("dataset.kind = synthetic requires dataset.synthetic")?;
            config_hash(c)
        }
        DatasetKind::Hybrid => {
            let c = ds
                .hybrid
                .as_ref()
                .context("dataset.kind = hybrid requires dataset.hybrid")?;
            config_hash(c)
        }
        DatasetKind::Real => {
            let c = ds
                .real
                .as_ref()
                .context("dataset.kind = real requires dataset.real")?;
            config_hash(c)
        }
        DatasetKind::Manifest => {
            bail!("dataset.kind = manifest points at an existing build; nothing to generate")
        }
    };
    if manifest_path.exists() {
        let existing = read_manifest(&manifest_path)?;
        if existing.config_hash == expected_hash {
            println!(
                "up-to-date: {} ({} entries, hash {})",
                manifest_path.display(),
                existing.entries.len(),
                existing.config_hash
            );
            return Ok(Outcome::Success);
        }
    }

    let (manifest, report) = match ds.kind {
        DatasetKind::Synthetic => {
            build_synthetic_dataset(ds.synthetic.as_ref().unwrap(), &dataset_dir)?
        }
        DatasetKind::Hybrid => build_hybrid_dataset(ds.hybrid.as_ref().unwrap(), &dataset_dir)?,
        DatasetKind::Real => ingest_real_recordings(ds.real.as_ref().unwrap(), &dataset_dir)?,
        DatasetKind::Manifest => unreachable!(),
    };
    println!(
        "built {} entries ({} skipped) -> {}",
        report.built,
        report.skipped,
        manifest_path.display()
    );
    for w in report.warnings.iter().take(10) {
        eprintln!("warning: {w}");
    }
    write_run_summary(
        &config.out_dir,
        &RunSummary {
            command: "generate",
            config_hash: manifest.config_hash.clone(),
            outputs: vec![manifest_path.display().to_string()],
            notes: report.warnings.clone(),
        },
    )?;
    Ok(Outcome::Success)
}
