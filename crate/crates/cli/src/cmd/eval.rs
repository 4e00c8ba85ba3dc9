use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vfdm_core::baselines::{clean_mitigate, rpca_mitigate};
use vfdm_core::dataset::{Dataset, SamplePair, MANIFEST_FILE};
use vfdm_core::metrics::{aggregate, score_sample, AggregateRow, EvalRegion, SampleReport};
use vfdm_core::{VisRole, VisibilityGrid};

use crate::cmd::model::Model;
use crate::config::{file_hash, Method, RunConfig, RunRecord};
use crate::error::{CliError, Result};

pub const REPORT_FILE: &str = "report.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Per-sample CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: u64,
    pub mode: String,
    pub source_count: u8,
    pub method: String,
    #[serde(rename = "rmse_K")]
    pub rmse_k: f64,
    pub ssim: f64,
    /// Empty when the mask has a single class.
    #[serde(rename = "tre_K")]
    pub tre_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCsvRow {
    pub method: String,
    pub mode: String,
    pub count: usize,
    #[serde(rename = "rmse_K")]
    pub rmse_k: f64,
    pub ssim: f64,
    #[serde(rename = "tre_K")]
    pub tre_k: Option<f64>,
}

impl From<&SampleReport> for ReportRow {
    fn from(r: &SampleReport) -> Self {
        ReportRow {
            id: r.id,
            mode: r.mode.to_string(),
            source_count: r.source_count,
            method: r.method.clone(),
            rmse_k: r.rmse_k,
            ssim: r.ssim,
            tre_k: r.tre_k,
        }
    }
}

impl From<&AggregateRow> for AggregateCsvRow {
    fn from(r: &AggregateRow) -> Self {
        AggregateCsvRow {
            method: r.method.clone(),
            mode: r.mode.to_string(),
            count: r.count,
            rmse_k: r.rmse_k,
            ssim: r.ssim,
            tre_k: r.tre_k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub reports: Vec<SampleReport>,
    pub aggregate: Vec<AggregateRow>,
}

fn estimates(method: Method, pairs: &[SamplePair], cfg: &RunConfig, model: Option<&Model>) -> Result<Vec<VisibilityGrid>> {
    match method {
        Method::None => Ok(pairs.iter().map(|p| p.dirty.clone().with_role(VisRole::Estimate)).collect()),
        Method::Clean => pairs
            .par_iter()
            .map(|p| Ok(clean_mitigate(&p.dirty, &cfg.eval.clean)?.estimate))
            .collect(),
        Method::Rpca => pairs
            .par_iter()
            .map(|p| Ok(rpca_mitigate(&p.dirty, &cfg.eval.rpca)?.estimate))
            .collect(),
        Method::Vfdm => {
            let model = model.expect("checked by the caller");
            let dirty: Vec<&VisibilityGrid> = pairs.iter().map(|p| &p.dirty).collect();
            let ids: Vec<u64> = pairs.iter().map(|p| p.id).collect();
            model.mitigate(&dirty, &ids, cfg.diffusion.eta, cfg.eval.seed, cfg.diffusion.sample_batch)
        }
    }
}

/// Scores every requested method on the test split and writes `report.csv`
/// and `aggregate.csv` into `out`.
pub fn run(cfg: &RunConfig, data: &Path, checkpoint: Option<&Path>, out: &Path, log: &mut dyn FnMut(&str)) -> Result<EvalOutcome> {
    cfg.validate()?;
    let mut methods = cfg.eval.methods.clone();
    methods.sort();
    methods.dedup();
    if methods.contains(&Method::Vfdm) && checkpoint.is_none() {
        return Err(CliError::Config("method vfdm needs --checkpoint".into()));
    }
    let ds = Dataset::open(data)?;
    let grid = ds.manifest.grid;
    let pattern = ds.manifest.pattern;
    let region = EvalRegion::disk(grid, cfg.eval.radius)?;
    let mut ids = ds.test_ids().to_vec();
    if let Some(limit) = cfg.eval.limit {
        ids.truncate(limit);
    }
    if ids.is_empty() {
        return Err(CliError::Config("test split is empty".into()));
    }
    let pairs = ds.read_all(&ids)?;
    let mut inputs = vec![("manifest".to_string(), file_hash(&data.join(MANIFEST_FILE))?)];
    let model = match checkpoint.filter(|_| methods.contains(&Method::Vfdm)) {
        Some(path) => {
            inputs.push(("checkpoint".into(), file_hash(path)?));
            Some(Model::load(path, grid.n)?)
        }
        None => None,
    };

    let mut reports = Vec::with_capacity(pairs.len() * methods.len());
    for &method in &methods {
        log(&format!("{}: {} pairs", method.name(), pairs.len()));
        let est = estimates(method, &pairs, cfg, model.as_ref())?;
        let scored: Vec<SampleReport> = pairs
            .par_iter()
            .zip(est.par_iter())
            .map(|(p, e)| {
                score_sample(
                    p.id,
                    p.mode,
                    p.source_count,
                    method.name(),
                    e,
                    &p.clean,
                    &p.dirty,
                    &p.mask,
                    &pattern,
                    &region,
                )
            })
            .collect::<vfdm_core::Result<_>>()?;
        reports.extend(scored);
    }
    let agg = aggregate(&reports);

    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut w = csv::Writer::from_path(out.join(REPORT_FILE))?;
    for r in &reports {
        w.serialize(ReportRow::from(r))?;
    }
    w.flush().map_err(|e| CliError::io(out.join(REPORT_FILE), e))?;
    let mut w = csv::Writer::from_path(out.join(AGGREGATE_FILE))?;
    for r in &agg {
        w.serialize(AggregateCsvRow::from(r))?;
    }
    w.flush().map_err(|e| CliError::io(out.join(AGGREGATE_FILE), e))?;
    RunRecord::new("eval", cfg, inputs).write(out)?;
    Ok(EvalOutcome { reports, aggregate: agg })
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?)
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateCsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<AggregateCsvRow>, _>>()?)
}
