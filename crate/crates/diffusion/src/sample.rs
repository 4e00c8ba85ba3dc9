use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vfdm_core::dataset::{denormalize, normalize};
use vfdm_core::{VisRole, VisibilityGrid};
use vfdm_nn::Real;

use crate::error::{DiffError, Result};
use crate::process::{step_with_eps, NoisePredictor};
use crate::schedule::NoiseSchedule;

fn normal_field<F: Real>(rng: &mut ChaCha8Rng, len: usize) -> Vec<F> {
    (0..len).map(|_| F::of(rng.sample::<f64, _>(StandardNormal))).collect()
}

/// Runs the reverse chain `T..1` for a batch of normalized conditions, each
/// `[2][side][side]` with its own seed. Returns the normalized estimates.
pub fn sample_chain<F: Real, P: NoisePredictor<F>>(
    net: &P,
    conds: &[Vec<F>],
    side: usize,
    sched: &NoiseSchedule,
    eta: f64,
    seeds: &[u64],
) -> Result<Vec<Vec<F>>> {
    let per = 2 * side * side;
    if conds.len() != seeds.len() || conds.iter().any(|c| c.len() != per) {
        return Err(DiffError::Config("condition/seed shapes disagree".into()));
    }
    let b = conds.len();
    let mut rngs: Vec<ChaCha8Rng> = seeds.iter().map(|&s| ChaCha8Rng::seed_from_u64(s)).collect();
    let mut xs: Vec<Vec<F>> = rngs.iter_mut().map(|r| normal_field(r, per)).collect();
    let mut input = vec![F::zero(); b * 2 * per];
    for t in (1..=sched.steps).rev() {
        for (k, (x, c)) in xs.iter().zip(conds).enumerate() {
            input[k * 2 * per..k * 2 * per + per].copy_from_slice(x);
            input[k * 2 * per + per..(k + 1) * 2 * per].copy_from_slice(c);
        }
        let eps = net.predict(&input, b, side, &vec![t as f64; b])?;
        for (k, (x, rng)) in xs.iter_mut().zip(&mut rngs).enumerate() {
            let z = (eta > 0.0 && t > 1).then(|| normal_field::<F>(rng, per));
            *x = step_with_eps(x, &eps[k * per..(k + 1) * per], t, sched, eta, z.as_deref())?;
        }
    }
    if xs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(DiffError::Numeric("reverse chain diverged".into()));
    }
    Ok(xs)
}

/// Estimates the clean visibilities for each dirty grid. The output is
/// denormalized with `scale`, Hermitian-symmetrized and tagged as an estimate.
pub fn mitigate<F: Real, P: NoisePredictor<F>>(
    dirty: &[&VisibilityGrid],
    net: &P,
    sched: &NoiseSchedule,
    eta: f64,
    seeds: &[u64],
    scale: f64,
) -> Result<Vec<VisibilityGrid>> {
    let Some(first) = dirty.first() else {
        return Ok(Vec::new());
    };
    let grid = first.grid;
    let mut conds = Vec::with_capacity(dirty.len());
    for d in dirty {
        grid.same_as(&d.grid)?;
        conds.push(normalize(d, scale)?.data.into_iter().map(F::of).collect::<Vec<F>>());
    }
    let xs = sample_chain(net, &conds, grid.n, sched, eta, seeds)?;
    xs.into_iter()
        .map(|x| {
            let data: Vec<f64> = x.into_iter().map(|v| v.f64()).collect();
            let mut est = denormalize(&data, scale, grid, VisRole::Estimate)?;
            est.hermitian_symmetrize();
            Ok(est)
        })
        .collect()
}
