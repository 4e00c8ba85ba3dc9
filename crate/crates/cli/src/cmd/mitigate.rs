use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vfdm_core::baselines::{clean_mitigate, rpca_mitigate};
use vfdm_core::dataset::{Dataset, MANIFEST_FILE};
use vfdm_core::metrics::reconstruct;
use vfdm_core::{inverse_bt, AntennaPattern, VisRole, VisibilityGrid};

use crate::cmd::model::Model;
use crate::config::{file_hash, write_atomic, Method, RunConfig, RunRecord};
use crate::error::{CliError, Result};
use crate::fields::FieldFile;

pub const SIDECAR_FILE: &str = "mitigate.json";

/// What the estimates were produced from and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigateSidecar {
    pub method: Method,
    pub eta: f64,
    pub seed: u64,
    /// Diffusion steps; absent for the classical methods.
    pub steps: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_sha256: Option<String>,
    pub ids: Vec<u64>,
    /// Relative imaginary residual of each reconstructed map.
    pub imag_residual: Vec<f64>,
}

pub struct MitigateArgs<'a> {
    pub input: &'a Path,
    pub ids: Option<Vec<u64>>,
    pub checkpoint: Option<&'a Path>,
    pub method: Method,
    pub out: &'a Path,
}

/// Dirty grids from a dataset directory (test split unless ids are given)
/// or from a single visibility field file.
fn load_inputs(input: &Path, ids: Option<Vec<u64>>, cfg: &RunConfig) -> Result<(Vec<u64>, Vec<VisibilityGrid>, AntennaPattern)> {
    if input.is_dir() {
        if !input.join(MANIFEST_FILE).exists() {
            return Err(CliError::Config(format!("{} holds no dataset manifest", input.display())));
        }
        let ds = Dataset::open(input)?;
        let ids = ids.unwrap_or_else(|| ds.test_ids().to_vec());
        let pairs = ds.read_all(&ids)?;
        Ok((ids, pairs.into_iter().map(|p| p.dirty).collect(), ds.manifest.pattern))
    } else {
        let vis = FieldFile::read(input)?
            .to_vis()?
            .ok_or_else(|| CliError::Config(format!("{} is not a visibility file", input.display())))?;
        Ok((vec![ids.and_then(|v| v.first().copied()).unwrap_or(0)], vec![vis], cfg.pattern))
    }
}

pub fn run(cfg: &RunConfig, args: MitigateArgs<'_>) -> Result<MitigateSidecar> {
    cfg.validate()?;
    let (ids, dirty, pattern) = load_inputs(args.input, args.ids, cfg)?;
    if dirty.is_empty() {
        return Err(CliError::Config("no input pairs selected".into()));
    }
    let grid = dirty[0].grid;
    let eta = cfg.diffusion.eta;
    let seed = cfg.eval.seed;
    let mut sidecar = MitigateSidecar {
        method: args.method,
        eta,
        seed,
        steps: None,
        checkpoint: None,
        checkpoint_sha256: None,
        ids: ids.clone(),
        imag_residual: Vec::new(),
    };
    let mut inputs = Vec::new();
    let estimates: Vec<VisibilityGrid> = match args.method {
        Method::Vfdm => {
            let path = args
                .checkpoint
                .ok_or_else(|| CliError::Config("vfdm mitigation needs --checkpoint".into()))?;
            let model = Model::load(path, grid.n)?;
            let digest = file_hash(path)?;
            sidecar.steps = Some(model.steps());
            sidecar.checkpoint = Some(path.to_path_buf());
            sidecar.checkpoint_sha256 = Some(digest.clone());
            inputs.push(("checkpoint".into(), digest));
            let refs: Vec<&VisibilityGrid> = dirty.iter().collect();
            model.mitigate(&refs, &ids, eta, seed, cfg.diffusion.sample_batch)?
        }
        Method::Clean => dirty
            .iter()
            .map(|d| Ok(clean_mitigate(d, &cfg.eval.clean)?.estimate))
            .collect::<Result<_>>()?,
        Method::Rpca => dirty
            .iter()
            .map(|d| Ok(rpca_mitigate(d, &cfg.eval.rpca)?.estimate))
            .collect::<Result<_>>()?,
        Method::None => dirty.iter().map(|d| d.clone().with_role(VisRole::Estimate)).collect(),
    };
    if args.input.is_dir() {
        inputs.push(("manifest".into(), file_hash(&args.input.join(MANIFEST_FILE))?));
    } else {
        inputs.push(("input".into(), file_hash(args.input)?));
    }

    fs::create_dir_all(args.out).map_err(|e| CliError::io(args.out, e))?;
    for (id, est) in ids.iter().zip(&estimates) {
        sidecar.imag_residual.push(inverse_bt(est).imag_residual);
        FieldFile::from_vis(est).write(&args.out.join(format!("est_{id:06}.vis.json")))?;
        let bt = reconstruct(est, &pattern)?;
        FieldFile::from_image(&bt).write(&args.out.join(format!("est_{id:06}.bt.json")))?;
    }
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    write_atomic(&args.out.join(SIDECAR_FILE), text.as_bytes())?;
    RunRecord::new("mitigate", cfg, inputs).write(args.out)?;
    Ok(sidecar)
}
