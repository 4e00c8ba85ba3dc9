//! Forward noising, posterior, noise-to-signal inversion and the reverse step.

use vfdm_nn::{Real, UNet};

use crate::error::{DiffError, Result};
use crate::schedule::NoiseSchedule;

/// Anything that predicts the injected noise from `[x_t (2ch), cond (2ch)]`.
pub trait NoisePredictor<F: Real> {
    /// `input` is sample-major `[B][4][side][side]`; returns `[B][2][side][side]`.
    fn predict(&self, input: &[F], batch: usize, side: usize, t: &[f64]) -> Result<Vec<F>>;
}

impl<F: Real> NoisePredictor<F> for UNet<F> {
    fn predict(&self, input: &[F], batch: usize, side: usize, t: &[f64]) -> Result<Vec<F>> {
        Ok(self.forward(input, batch, side, t)?)
    }
}

/// `x_t = abar_t x0 + bbar_t eps`.
pub fn q_sample<F: Real>(x0: &[F], t: usize, eps: &[F], s: &NoiseSchedule) -> Vec<F> {
    assert_eq!(x0.len(), eps.len());
    let (a, b) = (F::of(s.abar[t]), F::of(s.bbar[t]));
    x0.iter().zip(eps).map(|(x, e)| a * *x + b * *e).collect()
}

/// One forward transition `x_t = alpha_t x_{t-1} + beta_t eps`.
pub fn q_step<F: Real>(x_prev: &[F], t: usize, eps: &[F], s: &NoiseSchedule) -> Vec<F> {
    let (a, b) = (F::of(s.alpha[t]), F::of(s.beta[t]));
    x_prev.iter().zip(eps).map(|(x, e)| a * *x + b * *e).collect()
}

/// Posterior `q(x_{t-1} | x_t, x0)`: returns the mean and the variance `btilde_t^2`.
pub fn posterior_mean_var<F: Real>(x_t: &[F], x0: &[F], t: usize, s: &NoiseSchedule) -> (Vec<F>, f64) {
    let bb = s.bbar[t] * s.bbar[t];
    let cx = F::of(s.alpha[t] * s.bbar[t - 1] * s.bbar[t - 1] / bb);
    let c0 = F::of(s.abar[t - 1] * s.beta[t] * s.beta[t] / bb);
    let mean = x_t.iter().zip(x0).map(|(x, z)| cx * *x + c0 * *z).collect();
    (mean, s.btilde[t] * s.btilde[t])
}

/// `x0_hat = (x_t - bbar_t eps) / abar_t`.
pub fn predict_x0<F: Real>(x_t: &[F], eps: &[F], t: usize, s: &NoiseSchedule) -> Vec<F> {
    let (b, inv) = (F::of(s.bbar[t]), F::of(1.0 / s.abar[t]));
    x_t.iter().zip(eps).map(|(x, e)| (*x - b * *e) * inv).collect()
}

/// Reverse update from a given noise estimate. `z` is required when `eta > 0`
/// and `t > 1`, and ignored otherwise. At `t = 1` this returns `x0_hat`.
pub fn step_with_eps<F: Real>(
    x_t: &[F],
    eps: &[F],
    t: usize,
    s: &NoiseSchedule,
    eta: f64,
    z: Option<&[F]>,
) -> Result<Vec<F>> {
    s.check_t(t)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(DiffError::Config(format!("eta must lie in [0, 1], got {eta}")));
    }
    let x0 = predict_x0(x_t, eps, t, s);
    if t == 1 {
        return Ok(x0);
    }
    let sigma = eta * s.btilde[t];
    let prev_sq = s.bbar[t - 1] * s.bbar[t - 1];
    let rem = prev_sq - sigma * sigma;
    if rem < -1e-12 * prev_sq {
        return Err(DiffError::Numeric(format!(
            "sigma_t^2 exceeds bbar_(t-1)^2 at t = {t}"
        )));
    }
    let (a, c) = (F::of(s.abar[t - 1]), F::of(rem.max(0.0).sqrt()));
    let mut out: Vec<F> = x0.iter().zip(eps).map(|(x, e)| a * *x + c * *e).collect();
    if sigma > 0.0 {
        let z = z.ok_or_else(|| DiffError::Config("eta > 0 needs a noise draw".into()))?;
        let sg = F::of(sigma);
        for (o, zz) in out.iter_mut().zip(z) {
            *o += sg * *zz;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleConfig;

    #[test]
    fn zero_noise_scales_signal() {
        let s = ScheduleConfig::default().build().unwrap();
        let x0 = vec![1.0f64, -2.0, 0.5];
        let xt = q_sample(&x0, 30, &[0.0; 3], &s);
        for (a, b) in xt.iter().zip(&x0) {
            assert_eq!(*a, s.abar[30] * b);
        }
    }

    #[test]
    fn last_step_returns_x0_hat() {
        let s = ScheduleConfig::default().build().unwrap();
        let x = vec![0.3f64, 0.7];
        let e = vec![0.1f64, -0.4];
        let z = vec![5.0f64, 5.0];
        let a = step_with_eps(&x, &e, 1, &s, 1.0, Some(&z)).unwrap();
        assert_eq!(a, predict_x0(&x, &e, 1, &s));
        assert!(step_with_eps(&x, &e, 5, &s, 0.5, None).is_err());
        assert!(step_with_eps(&x, &e, 5, &s, 1.5, Some(&z)).is_err());
        assert!(step_with_eps(&x, &e, 0, &s, 0.0, None).is_err());
    }
}
