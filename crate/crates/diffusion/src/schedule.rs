use serde::{Deserialize, Serialize};

use crate::error::{DiffError, Result};

/// Largest admissible per-step noise variance; keeps `alpha_t` real.
const BSQ_CEILING: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Defaults to `1e-4 * 1000 / T`.
    #[serde(default)]
    pub bsq_min: Option<f64>,
    /// Defaults to `0.02 * 1000 / T`, capped below 1.
    #[serde(default)]
    pub bsq_max: Option<f64>,
}

fn default_steps() -> usize {
    100
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            steps: default_steps(),
            bsq_min: None,
            bsq_max: None,
        }
    }
}

impl ScheduleConfig {
    pub fn bounds(&self) -> (f64, f64) {
        let scale = 1000.0 / self.steps.max(1) as f64;
        let hi = self.bsq_max.unwrap_or((0.02 * scale).min(BSQ_CEILING));
        let lo = self.bsq_min.unwrap_or((1e-4 * scale).min(hi / 2.0));
        (lo, hi)
    }

    pub fn build(&self) -> Result<NoiseSchedule> {
        let (lo, hi) = self.bounds();
        NoiseSchedule::linear(self.steps, lo, hi)
    }
}

/// Per-step coefficients, indexed `0..=T`. Entry 0 of the per-step arrays
/// (`beta`, `alpha`, `btilde`) is unused and set to the identity step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub steps: usize,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub abar: Vec<f64>,
    pub bbar: Vec<f64>,
    pub btilde: Vec<f64>,
}

impl NoiseSchedule {
    /// `beta_t^2` rises linearly from `bsq_min` to `bsq_max`; `alpha_t^2 = 1 - beta_t^2`.
    pub fn linear(steps: usize, bsq_min: f64, bsq_max: f64) -> Result<Self> {
        if steps < 2 {
            return Err(DiffError::Config(format!("schedule needs T >= 2, got {steps}")));
        }
        if !(bsq_min > 0.0 && bsq_min < bsq_max && bsq_max < 1.0) {
            return Err(DiffError::Config(format!(
                "need 0 < bsq_min < bsq_max < 1, got {bsq_min} and {bsq_max}"
            )));
        }
        let mut bsq = vec![0.0; steps + 1];
        for (t, b) in bsq.iter_mut().enumerate().skip(1) {
            *b = bsq_min + (bsq_max - bsq_min) * (t - 1) as f64 / (steps - 1) as f64;
        }
        Self::from_beta_sq(&bsq)
    }

    fn from_beta_sq(bsq: &[f64]) -> Result<Self> {
        let steps = bsq.len() - 1;
        let mut s = NoiseSchedule {
            steps,
            beta: vec![0.0; steps + 1],
            alpha: vec![1.0; steps + 1],
            abar: vec![1.0; steps + 1],
            bbar: vec![0.0; steps + 1],
            btilde: vec![0.0; steps + 1],
        };
        let mut bbar_sq = 0.0;
        for t in 1..=steps {
            s.beta[t] = bsq[t].sqrt();
            s.alpha[t] = (1.0 - bsq[t]).sqrt();
            s.abar[t] = s.abar[t - 1] * s.alpha[t];
            let prev = bbar_sq;
            bbar_sq = s.alpha[t] * s.alpha[t] * prev + bsq[t];
            s.bbar[t] = bbar_sq.sqrt();
            s.btilde[t] = (bsq[t] * prev / bbar_sq).sqrt();
        }
        let last = s.abar[steps];
        if last >= 1e-2 {
            return Err(DiffError::Config(format!(
                "terminal signal level abar_T = {last:.3e} is not below 1e-2; raise bsq_max or T"
            )));
        }
        Ok(s)
    }

    #[inline]
    pub fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps {
            return Err(DiffError::Config(format!("timestep {t} outside 1..={}", self.steps)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_scale_with_steps() {
        let c = ScheduleConfig {
            steps: 1000,
            ..ScheduleConfig::default()
        };
        assert_eq!(c.bounds(), (1e-4, 0.02));
        let c = ScheduleConfig::default();
        let (lo, hi) = c.bounds();
        assert!((lo - 1e-3).abs() < 1e-15 && (hi - 0.2).abs() < 1e-15);
        let c = ScheduleConfig {
            steps: 10,
            ..ScheduleConfig::default()
        };
        assert_eq!(c.bounds(), (0.01, 0.999));
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(NoiseSchedule::linear(1, 1e-4, 0.02).is_err());
        assert!(NoiseSchedule::linear(100, 0.02, 1e-4).is_err());
        assert!(NoiseSchedule::linear(100, 1e-4, 1.0).is_err());
        // too little total noise for the terminal bound
        let e = NoiseSchedule::linear(100, 1e-5, 1e-3).unwrap_err();
        assert!(e.to_string().contains("abar_T"));
    }
}
