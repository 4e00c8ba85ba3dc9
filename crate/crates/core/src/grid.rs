use serde::{Deserialize, Serialize};

use crate::error::{Result, VfdmError};

/// Sampling geometry shared by image-domain and visibility-domain fields.
///
/// Images live on direction cosines `xi_k = -1 + k * dxi` with `dxi = 2 / n`;
/// visibilities live on baselines `u_i = (i - n/2) * du`. The pair is a
/// discrete Fourier pair only when `du * dxi * n == 1`, which pins `du = 0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default = "default_du")]
    pub du: f64,
    /// Radiometric constant `kZ / lambda_c^2` in normalized units.
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_support_radius")]
    pub support_radius: f64,
}

fn default_du() -> f64 {
    0.5
}
fn default_c0() -> f64 {
    1.0
}
fn default_support_radius() -> f64 {
    0.9
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 32,
            du: default_du(),
            c0: default_c0(),
            support_radius: default_support_radius(),
        }
    }
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self> {
        let g = GridSpec {
            n,
            ..GridSpec::default()
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || !self.n.is_multiple_of(2) {
            return Err(VfdmError::Config(format!(
                "grid n must be even and >= 8, got {}",
                self.n
            )));
        }
        if !(self.du > 0.0) {
            return Err(VfdmError::Config(format!("du must be positive, got {}", self.du)));
        }
        if (self.du * self.dxi() * self.n as f64 - 1.0).abs() > 1e-12 {
            return Err(VfdmError::Config(format!(
                "du * dxi * n must equal 1 (du = {}, dxi = {}, n = {})",
                self.du,
                self.dxi(),
                self.n
            )));
        }
        if !(self.support_radius > 0.0 && self.support_radius < 1.0) {
            return Err(VfdmError::Config(format!(
                "support radius must lie in (0, 1), got {}",
                self.support_radius
            )));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(VfdmError::Config(format!("c0 must be positive, got {}", self.c0)));
        }
        Ok(())
    }

    #[inline]
    pub fn dxi(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Visibility-domain quadrature weight `du * dv`.
    #[inline]
    pub fn ds(&self) -> f64 {
        self.du * self.du
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn xi(&self, k: usize) -> f64 {
        -1.0 + k as f64 * self.dxi()
    }

    #[inline]
    pub fn u(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.du
    }

    /// Index of the mirrored baseline `-u` on the periodic grid.
    #[inline]
    pub fn mirror(&self, i: usize) -> usize {
        (self.n - i) % self.n
    }

    #[inline]
    pub fn in_support(&self, k: usize, l: usize) -> bool {
        let (x, y) = (self.xi(k), self.xi(l));
        x * x + y * y <= self.support_radius * self.support_radius
    }

    /// Nearest pixel (row, col) of a direction-cosine position, clamped to the grid.
    pub fn nearest_pixel(&self, xi: f64, eta: f64) -> (usize, usize) {
        let idx = |c: f64| {
            let k = ((c + 1.0) / self.dxi()).round();
            k.clamp(0.0, (self.n - 1) as f64) as usize
        };
        (idx(xi), idx(eta))
    }

    pub fn support_mask(&self) -> Vec<bool> {
        let n = self.n;
        (0..n * n).map(|p| self.in_support(p / n, p % n)).collect()
    }

    pub fn same_as(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(VfdmError::Config(format!(
                "grid mismatch: n={} vs n={}",
                self.n, other.n
            )));
        }
        Ok(())
    }
}
