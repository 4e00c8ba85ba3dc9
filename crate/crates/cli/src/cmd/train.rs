use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use vfdm_core::dataset::{Dataset, MANIFEST_FILE};
use vfdm_diffusion::{train_step, TrainSet};
use vfdm_nn::checkpoint::{self, CheckpointMeta};
use vfdm_nn::{Adam, Precision, Real, UNet};

use crate::config::{file_hash, RunConfig, RunRecord};
use crate::error::{CliError, Result};

pub const LOSS_FILE: &str = "loss.csv";

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub resumed_from: Option<u64>,
    pub steps: u64,
    pub checkpoint: PathBuf,
    pub last_loss: Option<f64>,
}

pub fn checkpoint_name(step: u64) -> String {
    format!("ckpt_{step:06}.bin")
}

/// Highest-step checkpoint in `dir`, if any.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<(u64, PathBuf)>> {
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|s| s.to_str()) else {
            continue;
        };
        let Some(step) = name
            .strip_prefix("ckpt_")
            .and_then(|s| s.strip_suffix(".bin"))
            .and_then(|s| s.parse::<u64>().ok())
        else {
            continue;
        };
        if best.as_ref().is_none_or(|(b, _)| step > *b) {
            best = Some((step, path));
        }
    }
    Ok(best)
}

/// One row of the loss log.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossRow {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

pub fn read_loss_log(path: &Path) -> Result<Vec<LossRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<LossRow>, _>>()?)
}

fn checkpoint_meta<F: Real>(cfg: &RunConfig, net: &UNet<F>, step: u64, grid_n: usize, scale: f64) -> CheckpointMeta {
    CheckpointMeta {
        unet: net.config.clone(),
        dtype: F::PRECISION,
        step,
        grid_n,
        scale,
        schedule: serde_json::to_value(&cfg.diffusion.schedule).expect("schedule serializes"),
        training: serde_json::to_value(&cfg.train).expect("training config serializes"),
    }
}

/// Trains on the dataset in `data`, writing checkpoints and `loss.csv` into
/// `run_dir`. Resumes from the newest checkpoint there, which must come from
/// the same model, schedule and training settings.
pub fn run(cfg: &RunConfig, data: &Path, run_dir: &Path, log: &mut dyn FnMut(&str)) -> Result<TrainOutcome> {
    cfg.validate()?;
    match cfg.model.precision {
        Precision::F32 => run_typed::<f32>(cfg, data, run_dir, log),
        Precision::F64 => run_typed::<f64>(cfg, data, run_dir, log),
    }
}

fn run_typed<F: Real>(cfg: &RunConfig, data: &Path, run_dir: &Path, log: &mut dyn FnMut(&str)) -> Result<TrainOutcome> {
    let ds = Dataset::open(data)?;
    let grid = ds.manifest.grid;
    if grid.n % cfg.model.size_multiple() != 0 {
        return Err(CliError::Config(format!(
            "dataset grid n = {} does not fit a U-Net needing multiples of {}",
            grid.n,
            cfg.model.size_multiple()
        )));
    }
    let scale = ds.manifest.scale;
    let sched = cfg.diffusion.schedule.build()?;
    fs::create_dir_all(run_dir).map_err(|e| CliError::io(run_dir, e))?;

    let (mut net, mut adam, start) = match latest_checkpoint(run_dir)? {
        Some((step, path)) => {
            let ck = checkpoint::load::<F>(&path, Some(grid.n))?;
            let want = checkpoint_meta(cfg, &ck.net, step, grid.n, scale);
            if ck.meta != want {
                return Err(CliError::Config(format!(
                    "{} was written under different settings; train into a fresh directory",
                    path.display()
                )));
            }
            log(&format!("resuming from {} at step {step}", path.display()));
            (ck.net, ck.adam, Some(step))
        }
        None => {
            let net = UNet::<F>::new(cfg.model.clone(), cfg.train.seed)?;
            let adam = Adam::new(&net.params);
            (net, adam, None)
        }
    };
    let first = start.unwrap_or(0);

    let record = RunRecord::new(
        "train",
        cfg,
        vec![("manifest".into(), file_hash(&data.join(MANIFEST_FILE))?)],
    );
    record.write(run_dir)?;

    let pairs = ds.read_all(ds.train_ids())?;
    let set = TrainSet::<F>::from_pairs(&pairs, scale)?;
    drop(pairs);
    log(&format!(
        "{} training pairs, {} parameters, steps {first}..{}",
        set.len(),
        net.param_count(),
        cfg.train.steps
    ));

    // rows at or past the resume step belong to the lost tail of an interrupted run
    let loss_path = run_dir.join(LOSS_FILE);
    let kept: Vec<LossRow> = if start.is_some() && loss_path.exists() {
        read_loss_log(&loss_path)?.into_iter().filter(|r| r.step < first).collect()
    } else {
        Vec::new()
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&loss_path)?;
    w.write_record(["step", "loss", "lr"])?;
    for r in &kept {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(&loss_path, e))?;
    drop(w);
    let file = OpenOptions::new()
        .append(true)
        .open(&loss_path)
        .map_err(|e| CliError::io(&loss_path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);

    let mut last_ckpt = start.map(|s| run_dir.join(checkpoint_name(s)));
    let mut last_loss = None;
    let mut acc = 0.0;
    for step in first..cfg.train.steps {
        let (loss, lr) = match train_step(&mut net, &mut adam, &set, &sched, &cfg.train, step) {
            Ok(v) => v,
            Err(e) => {
                w.flush().map_err(|e| CliError::io(&loss_path, e))?;
                return Err(CliError::Runtime(format!(
                    "training aborted at step {step}: {e}; last good checkpoint: {}",
                    last_ckpt.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into())
                )));
            }
        };
        if !loss.is_finite() {
            w.flush().map_err(|e| CliError::io(&loss_path, e))?;
            return Err(CliError::Runtime(format!("loss became {loss} at step {step}")));
        }
        w.serialize(LossRow { step, loss, lr })?;
        last_loss = Some(loss);
        acc += loss;
        let done = step + 1;
        if done % 100 == 0 {
            log(&format!("step {done} loss {:.5} lr {lr:.3e}", acc / 100.0));
            acc = 0.0;
        }
        if done % cfg.train.checkpoint_every == 0 || done == cfg.train.steps {
            w.flush().map_err(|e| CliError::io(&loss_path, e))?;
            let path = run_dir.join(checkpoint_name(done));
            checkpoint::save(&path, &checkpoint_meta(cfg, &net, done, grid.n, scale), &net, &adam)?;
            last_ckpt = Some(path);
        }
    }
    w.flush().map_err(|e| CliError::io(&loss_path, e))?;
    let checkpoint = last_ckpt.ok_or_else(|| CliError::Config("no training steps requested".into()))?;
    Ok(TrainOutcome {
        resumed_from: start,
        steps: cfg.train.steps,
        checkpoint,
        last_loss,
    })
}
