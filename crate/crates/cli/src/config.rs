//! Run configuration: one JSON document, every section optional, unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vfdm_core::baselines::{CleanConfig, RpcaConfig};
use vfdm_core::dataset::{DatasetConfig, SplitRule};
use vfdm_core::metrics::DEFAULT_EVAL_RADIUS;
use vfdm_core::{AntennaPattern, GridSpec, SimConfig};
use vfdm_diffusion::{ScheduleConfig, TrainConfig};
use vfdm_nn::UNetConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default = "d_pairs")]
    pub pairs: usize,
    /// Weights of weak, medium, strong, very strong, hybrid.
    #[serde(default = "d_mixture")]
    pub mixture: [f64; 5],
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_shard")]
    pub shard_size: usize,
    #[serde(default)]
    pub split: SplitRule,
}

fn d_pairs() -> usize {
    DatasetConfig::default().pairs
}
fn d_mixture() -> [f64; 5] {
    DatasetConfig::default().mixture
}
fn d_shard() -> usize {
    DatasetConfig::default().shard_size
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            pairs: d_pairs(),
            mixture: d_mixture(),
            seed: 0,
            shard_size: d_shard(),
            split: SplitRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    #[serde(default)]
    pub schedule: ScheduleConfig,
    /// 0 gives the deterministic sampler, 1 the ancestral one.
    #[serde(default)]
    pub eta: f64,
    /// Pairs pushed through the network together while sampling.
    #[serde(default = "d_sample_batch")]
    pub sample_batch: usize,
}

fn d_sample_batch() -> usize {
    16
}

impl Default for DiffusionSection {
    fn default() -> Self {
        DiffusionSection {
            schedule: ScheduleConfig::default(),
            eta: 0.0,
            sample_batch: d_sample_batch(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    None,
    Clean,
    Rpca,
    Vfdm,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Clean => "clean",
            Method::Rpca => "rpca",
            Method::Vfdm => "vfdm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Radius of the evaluation disk in direction cosines.
    #[serde(default = "d_radius")]
    pub radius: f64,
    #[serde(default = "d_methods")]
    pub methods: Vec<Method>,
    /// Evaluate only the first `limit` test pairs.
    #[serde(default)]
    pub limit: Option<usize>,
    /// Base seed of the sampling noise; each pair draws from `(seed, id)`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clean: CleanConfig,
    #[serde(default)]
    pub rpca: RpcaConfig,
}

fn d_radius() -> f64 {
    DEFAULT_EVAL_RADIUS
}
fn d_methods() -> Vec<Method> {
    vec![Method::None, Method::Clean, Method::Rpca, Method::Vfdm]
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            radius: d_radius(),
            methods: d_methods(),
            limit: None,
            seed: 0,
            clean: CleanConfig::default(),
            rpca: RpcaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default = "d_data")]
    pub data: PathBuf,
    #[serde(default = "d_run")]
    pub run: PathBuf,
}

fn d_data() -> PathBuf {
    PathBuf::from("data")
}
fn d_run() -> PathBuf {
    PathBuf::from("run")
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data: d_data(),
            run: d_run(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub simulate: SimConfig,
    #[serde(default)]
    pub pattern: AntennaPattern,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub model: UNetConfig,
    #[serde(default)]
    pub diffusion: DiffusionSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            grid: self.grid,
            sim: self.simulate,
            pattern: self.pattern,
            pairs: self.dataset.pairs,
            mixture: self.dataset.mixture,
            seed: self.dataset.seed,
            shard_size: self.dataset.shard_size,
            split: self.dataset.split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_config().validate()?;
        self.model.validate()?;
        self.diffusion.schedule.build()?;
        self.train.validate()?;
        self.eval.clean.validate()?;
        self.eval.rpca.validate()?;
        if !(self.diffusion.eta >= 0.0 && self.diffusion.eta <= 1.0) {
            return Err(CliError::Config(format!("eta must lie in [0, 1], got {}", self.diffusion.eta)));
        }
        if self.diffusion.sample_batch == 0 {
            return Err(CliError::Config("sample_batch must be positive".into()));
        }
        if self.eval.methods.is_empty() {
            return Err(CliError::Config("eval.methods is empty".into()));
        }
        if !self.grid.n.is_multiple_of(self.model.size_multiple()) {
            return Err(CliError::Config(format!(
                "grid n = {} is not a multiple of {} required by the U-Net depth",
                self.grid.n,
                self.model.size_multiple()
            )));
        }
        Ok(())
    }

    /// Pretty JSON with every default filled in.
    pub fn resolved_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| CliError::io(path, e))?))
}

/// Archived record of one command invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config: RunConfig,
    /// Content hashes of the files the command read, by role.
    pub inputs: Vec<(String, String)>,
    /// Hash over the resolved config and the input hashes.
    pub hash: String,
}

impl RunRecord {
    pub fn new(command: &str, config: &RunConfig, inputs: Vec<(String, String)>) -> Self {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(config.resolved_json().as_bytes());
        for (role, digest) in &inputs {
            h.update(role.as_bytes());
            h.update(digest.as_bytes());
        }
        RunRecord {
            command: command.to_string(),
            config: config.clone(),
            inputs,
            hash: hex::encode(h.finalize()),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("{}_config.json", self.command));
        let mut text = serde_json::to_string_pretty(self).expect("record serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
