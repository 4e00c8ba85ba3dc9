use std::fs;
use std::path::Path;

use vfdm_core::dataset::{generate_dataset, DatasetManifest, MANIFEST_FILE};

use crate::config::{RunConfig, RunRecord};
use crate::error::{CliError, Result};

/// Generates the paired dataset into `dir`. An existing dataset is only
/// replaced when `force` is set.
pub fn run(cfg: &RunConfig, dir: &Path, force: bool) -> Result<DatasetManifest> {
    cfg.validate()?;
    if dir.join(MANIFEST_FILE).exists() {
        if !force {
            return Err(CliError::Config(format!(
                "{} already holds a dataset; pass --force to overwrite",
                dir.display()
            )));
        }
        clear_dataset(dir)?;
    }
    let manifest = generate_dataset(&cfg.dataset_config(), dir)?;
    RunRecord::new("gen", cfg, Vec::new()).write(dir)?;
    Ok(manifest)
}

fn clear_dataset(dir: &Path) -> Result<()> {
    // manifest first, so an interrupted clear never leaves a committed dataset behind
    let manifest = dir.join(MANIFEST_FILE);
    fs::remove_file(&manifest).map_err(|e| CliError::io(&manifest, e))?;
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        if name.starts_with("shard_") && name.ends_with(".bin") {
            fs::remove_file(&path).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

pub fn summary(m: &DatasetManifest) -> String {
    let mut s = format!(
        "{} pairs on a {}x{} grid, scale {:.4}, {} shards",
        m.pair_count,
        m.grid.n,
        m.grid.n,
        m.scale,
        m.shards.len()
    );
    if let Some(split) = &m.split {
        s.push_str(&format!(", train {} / test {}", split.train.len(), split.test.len()));
    }
    for (mode, count) in &m.mode_counts {
        s.push_str(&format!("\n  {mode:<12} {count}"));
    }
    s
}
