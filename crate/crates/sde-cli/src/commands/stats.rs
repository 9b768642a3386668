use anyhow::Result;

use sde_core::evaluation::BinSpec;
use sde_core::scenegen::dataset_stats;

use super::{load_manifest, Outcome};
use crate::config::ExperimentConfig;
use crate::CommonArgs;

pub fn run(args: &CommonArgs) -> Result<Outcome> {
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply_overrides(args.seed, args.out.clone(), None);
    let manifest_path = config.manifest_path()?;
    let (manifest, _) = load_manifest(&manifest_path)?;
    let bins = BinSpec::new(config.eval.bins.clone())?;
    let stats = dataset_stats(&manifest, &bins);

    println!("entries: {}", stats.num_entries);
    for (group, count) in &stats.group_sizes {
        println!("  {group}: {count}");
    }
    println!("distance histogram:");
    for (label, count) in &stats.distance_histogram {
        println!("  {label}: {count}");
    }
    if let Some((lo, hi)) = stats.distance_min_max {
        println!("distance range: {lo:.2} .. {hi:.2} m");
    }
    if let Some([p10, p50, p90]) = stats.rt60_percentiles {
        println!("rt60 percentiles: p10 {p10:.2} s, median {p50:.2} s, p90 {p90:.2} s");
    }
    let stats_path = config.out_dir.join("stats.json");
    std::fs::create_dir_all(&config.out_dir)?;
    std::fs::write(&stats_path, serde_json::to_vec_pretty(&stats)?)?;
    println!("written to {}", stats_path.display());
    Ok(Outcome::Success)
}
