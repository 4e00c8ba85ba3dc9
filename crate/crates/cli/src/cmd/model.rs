use std::path::Path;

use vfdm_core::simulate::derive_seed;
use vfdm_core::VisibilityGrid;
use vfdm_diffusion::{mitigate, NoiseSchedule, ScheduleConfig};
use vfdm_nn::checkpoint::{self, Checkpoint, CheckpointMeta};
use vfdm_nn::{Precision, Real};

use crate::error::{CliError, Result};

enum Net {
    F32(Checkpoint<f32>),
    F64(Checkpoint<f64>),
}

/// A trained checkpoint ready for sampling, in whichever precision it was saved.
pub struct Model {
    net: Net,
    pub meta: CheckpointMeta,
    pub schedule: ScheduleConfig,
    sched: NoiseSchedule,
}

impl Model {
    /// Loads `path` and checks it matches a grid of side `grid_n`.
    pub fn load(path: &Path, grid_n: usize) -> Result<Self> {
        if !path.exists() {
            return Err(CliError::Config(format!("checkpoint {} does not exist", path.display())));
        }
        let meta = checkpoint::read_meta(path)?;
        if meta.grid_n != grid_n {
            return Err(CliError::Config(format!(
                "checkpoint was trained on n = {}, input has n = {grid_n}",
                meta.grid_n
            )));
        }
        let net = match meta.dtype {
            Precision::F32 => Net::F32(checkpoint::load(path, Some(grid_n))?),
            Precision::F64 => Net::F64(checkpoint::load(path, Some(grid_n))?),
        };
        let schedule: ScheduleConfig = serde_json::from_value(meta.schedule.clone())
            .map_err(|e| CliError::Config(format!("checkpoint schedule: {e}")))?;
        let sched = schedule.build()?;
        Ok(Model {
            net,
            meta,
            schedule,
            sched,
        })
    }

    pub fn steps(&self) -> usize {
        self.sched.steps
    }

    /// Samples one estimate per dirty grid; pair `ids[k]` draws its noise from `(seed, id)`.
    /// Batching does not change the result.
    pub fn mitigate(&self, dirty: &[&VisibilityGrid], ids: &[u64], eta: f64, seed: u64, batch: usize) -> Result<Vec<VisibilityGrid>> {
        let mut out = Vec::with_capacity(dirty.len());
        for (d, i) in dirty.chunks(batch.max(1)).zip(ids.chunks(batch.max(1))) {
            let seeds: Vec<u64> = i.iter().map(|&id| derive_seed(seed, id)).collect();
            out.extend(match &self.net {
                Net::F32(c) => run(d, &c.net, &self.sched, eta, &seeds, self.meta.scale)?,
                Net::F64(c) => run(d, &c.net, &self.sched, eta, &seeds, self.meta.scale)?,
            });
        }
        Ok(out)
    }
}

fn run<F: Real>(
    dirty: &[&VisibilityGrid],
    net: &vfdm_nn::UNet<F>,
    sched: &NoiseSchedule,
    eta: f64,
    seeds: &[u64],
    scale: f64,
) -> Result<Vec<VisibilityGrid>> {
    Ok(mitigate(dirty, net, sched, eta, seeds, scale)?)
}
