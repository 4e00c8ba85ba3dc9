use crate::error::{NnError, Result};
use crate::real::Real;

pub const LR0: f64 = 6e-4;

/// Cosine decay from `lr0` at step 0 down to `lr0 / 2` at `total`.
pub fn lr_at(step: u64, total: u64, lr0: f64) -> f64 {
    if total == 0 {
        return lr0;
    }
    let frac = step.min(total) as f64 / total as f64;
    lr0 * (0.75 + 0.25 * (std::f64::consts::PI * frac).cos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(params: &[Vec<F>]) -> Self {
        let zeros = || params.iter().map(|p| vec![F::zero(); p.len()]).collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One bias-corrected update.
    pub fn update(&mut self, params: &mut [Vec<F>], grads: &[Vec<F>], lr: f64) -> Result<()> {
        if params.len() != grads.len()
            || params.len() != self.m.len()
            || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
        {
            return Err(NnError::Shape("adam: gradient shapes do not match".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let (ob1, ob2) = (F::of(1.0 - self.beta1), F::of(1.0 - self.beta2));
        let step_size = F::of(lr / c1);
        let sc2 = F::of(1.0 / c2.sqrt());
        let eps = F::of(self.eps);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + ob1 * g;
                *v = b2 * *v + ob2 * g * g;
                *p -= step_size * *m / ((*v).sqrt() * sc2 + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert!((lr_at(0, 1000, LR0) - 6e-4).abs() < 1e-18);
        assert!((lr_at(1000, 1000, LR0) - 3e-4).abs() < 1e-18);
        assert!((lr_at(500, 1000, LR0) - 4.5e-4).abs() < 1e-15);
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut p = vec![vec![1.0f64, -2.0]];
        let mut opt = Adam::new(&p);
        opt.update(&mut p, &[vec![0.0, 0.0]], 1e-2).unwrap();
        assert_eq!(p, vec![vec![1.0, -2.0]]);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn hand_trajectory() {
        // g = 1 twice: m1 = 0.1, v1 = 0.001, mhat = vhat = 1 -> step lr/(1+eps);
        // m2 = 0.19, v2 = 0.001999, mhat = 0.19/0.19 = 1, vhat = 1.
        let lr = 0.01;
        let mut p = vec![vec![0.5f64]];
        let mut opt = Adam::new(&p);
        opt.update(&mut p, &[vec![1.0]], lr).unwrap();
        let want1 = 0.5 - lr / (1.0 + 1e-8);
        assert!((p[0][0] - want1).abs() < 1e-15);
        opt.update(&mut p, &[vec![1.0]], lr).unwrap();
        assert!((p[0][0] - (want1 - lr / (1.0 + 1e-8))).abs() < 1e-12);
    }

    #[test]
    fn odd_in_gradient() {
        let mut a = vec![vec![0.0f64, 0.0]];
        let mut b = a.clone();
        let (mut oa, mut ob) = (Adam::new(&a), Adam::new(&b));
        oa.update(&mut a, &[vec![0.3, -2.0]], 1e-3).unwrap();
        ob.update(&mut b, &[vec![-0.3, 2.0]], 1e-3).unwrap();
        assert_eq!(a[0][0], -b[0][0]);
        assert_eq!(a[0][1], -b[0][1]);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![vec![0.0f64; 3]];
        let mut opt = Adam::new(&p);
        assert!(opt.update(&mut p, &[vec![0.0; 2]], 1e-3).is_err());
    }
}
