use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use vfdm_core::dataset::{normalize, SamplePair};
use vfdm_core::simulate::derive_seed;
use vfdm_nn::{lr_at, Adam, Real, UNet, LR0};

use crate::error::{DiffError, Result};
use crate::process::q_sample;
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_steps")]
    pub steps: u64,
    #[serde(default = "d_batch")]
    pub batch: usize,
    #[serde(default = "d_lr0")]
    pub lr0: f64,
    #[serde(default = "d_every")]
    pub checkpoint_every: u64,
    #[serde(default)]
    pub seed: u64,
}

fn d_steps() -> u64 {
    20_000
}
fn d_batch() -> usize {
    16
}
fn d_lr0() -> f64 {
    LR0
}
fn d_every() -> u64 {
    1000
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: d_steps(),
            batch: d_batch(),
            lr0: d_lr0(),
            checkpoint_every: d_every(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch == 0 || self.checkpoint_every == 0 {
            return Err(DiffError::Config("steps, batch and checkpoint_every must be positive".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(DiffError::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        Ok(())
    }
}

/// Normalized training pairs held in memory, each `[2][n][n]`.
#[derive(Debug, Clone)]
pub struct TrainSet<F> {
    pub side: usize,
    pub clean: Vec<Vec<F>>,
    pub dirty: Vec<Vec<F>>,
}

impl<F: Real> TrainSet<F> {
    pub fn from_pairs(pairs: &[SamplePair], scale: f64) -> Result<Self> {
        let side = pairs
            .first()
            .map(|p| p.clean.grid.n)
            .ok_or_else(|| DiffError::Config("training set is empty".into()))?;
        let cast = |v: Vec<f64>| v.into_iter().map(F::of).collect::<Vec<F>>();
        let mut set = TrainSet {
            side,
            clean: Vec::with_capacity(pairs.len()),
            dirty: Vec::with_capacity(pairs.len()),
        };
        for p in pairs {
            set.clean.push(cast(normalize(&p.clean, scale)?.data));
            set.dirty.push(cast(normalize(&p.dirty, scale)?.data));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }
}

/// Per-sample draws of one training batch.
#[derive(Debug, Clone)]
pub struct BatchDraw<F> {
    pub items: Vec<usize>,
    pub t: Vec<usize>,
    pub eps: Vec<F>,
}

/// Deterministic in `(seed, step)` alone, so a resumed run sees the same batches.
pub fn draw_batch<F: Real>(n_items: usize, batch: usize, per_item: usize, steps: usize, seed: u64, step: u64) -> BatchDraw<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, step));
    let items = if batch <= n_items {
        index::sample(&mut rng, n_items, batch).into_vec()
    } else {
        (0..batch).map(|_| rng.random_range(0..n_items)).collect()
    };
    let t = (0..batch).map(|_| rng.random_range(1..=steps)).collect();
    let eps = (0..batch * per_item)
        .map(|_| F::of(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    BatchDraw { items, t, eps }
}

/// Simplified objective: mean squared error between the drawn noise and its prediction.
/// Returns the loss and the parameter gradients.
pub fn training_loss<F: Real>(
    net: &UNet<F>,
    set: &TrainSet<F>,
    sched: &NoiseSchedule,
    draw: &BatchDraw<F>,
) -> Result<(f64, Vec<Vec<F>>)> {
    let side = set.side;
    let per = 2 * side * side;
    let b = draw.items.len();
    let mut input = Vec::with_capacity(b * 2 * per);
    for (k, (&i, &t)) in draw.items.iter().zip(&draw.t).enumerate() {
        let eps = &draw.eps[k * per..(k + 1) * per];
        input.extend(q_sample(&set.clean[i], t, eps, sched));
        input.extend_from_slice(&set.dirty[i]);
    }
    let tf: Vec<f64> = draw.t.iter().map(|&t| t as f64).collect();
    Ok(net.loss_and_grad(&input, b, side, &tf, &draw.eps)?)
}

/// One optimizer step; returns `(loss, lr)`.
pub fn train_step<F: Real>(
    net: &mut UNet<F>,
    adam: &mut Adam<F>,
    set: &TrainSet<F>,
    sched: &NoiseSchedule,
    cfg: &TrainConfig,
    step: u64,
) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(DiffError::Config("training set is empty".into()));
    }
    let per = 2 * set.side * set.side;
    let draw = draw_batch::<F>(set.len(), cfg.batch, per, sched.steps, cfg.seed, step);
    let (loss, grads) = training_loss(net, set, sched, &draw)?;
    let lr = lr_at(step, cfg.steps, cfg.lr0);
    adam.update(&mut net.params, &grads, lr)?;
    if net.params.iter().flatten().any(|v| !v.is_finite()) {
        return Err(DiffError::Numeric(format!("parameters became non-finite at step {step}")));
    }
    Ok((loss, lr))
}
