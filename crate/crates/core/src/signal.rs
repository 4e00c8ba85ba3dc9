//! Imaging physics of a synthetic aperture interferometric radiometer.
//!
//! Brightness temperature `T_B` becomes modified brightness temperature
//! `T_M = c0 * T_B * |f|^2 / sqrt(1 - xi^2 - eta^2)`, and `T_M` and the
//! visibility function `V(u, v)` form a discrete Fourier pair on the grid
//! described by [`GridSpec`]. Arrays are row-major: image index `k * n + l`
//! holds `(xi_k, eta_l)`, visibility index `i * n + j` holds `(u_i, v_j)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfdmError};
use crate::grid::GridSpec;
use crate::simulate::RfiSource;

/// Imaginary-to-real Frobenius ratio above which an inversion is flagged.
pub const IMAG_RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneImage {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedBT {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisRole {
    Clean,
    Rfi,
    Dirty,
    Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityGrid {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    pub role: VisRole,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AntennaPattern {
    #[default]
    Uniform,
    /// `|f|^2 = exp(-rho^2 / (2 sigma^2))`.
    Gaussian { sigma: f64 },
}

impl AntennaPattern {
    pub fn gaussian() -> Self {
        AntennaPattern::Gaussian { sigma: 0.8 }
    }

    /// Power pattern `|f(xi, eta)|^2`.
    pub fn power(&self, xi: f64, eta: f64) -> f64 {
        match *self {
            AntennaPattern::Uniform => 1.0,
            AntennaPattern::Gaussian { sigma } => (-(xi * xi + eta * eta) / (2.0 * sigma * sigma)).exp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AntennaPattern::Uniform => Ok(()),
            AntennaPattern::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            AntennaPattern::Gaussian { sigma } => Err(VfdmError::Config(format!(
                "gaussian pattern width must be positive, got {sigma}"
            ))),
        }
    }
}

impl SceneImage {
    pub fn zeros(grid: GridSpec) -> Self {
        SceneImage {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(SceneImage { grid, values })
    }

    #[inline]
    pub fn at(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.grid.n + l]
    }
}

impl ModifiedBT {
    pub fn zeros(grid: GridSpec) -> Self {
        ModifiedBT {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(ModifiedBT { grid, values })
    }

    #[inline]
    pub fn at(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.grid.n + l]
    }
}

impl VisibilityGrid {
    pub fn zeros(grid: GridSpec, role: VisRole) -> Self {
        VisibilityGrid {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            role,
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>, role: VisRole) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(VisibilityGrid { grid, values, role })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.n + j]
    }

    pub fn with_role(mut self, role: VisRole) -> Self {
        self.role = role;
        self
    }

    /// Largest deviation from `V(-u,-v) = conj(V(u,v))`, relative to `max |V|`.
    pub fn hermitian_error(&self) -> f64 {
        let n = self.grid.n;
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let m = self.at(self.grid.mirror(i), self.grid.mirror(j));
                worst = worst.max((m - self.at(i, j).conj()).norm());
            }
        }
        worst / scale
    }

    /// Averages every sample with the conjugate of its mirrored partner.
    pub fn hermitian_symmetrize(&mut self) {
        let n = self.grid.n;
        let src = self.values.clone();
        for i in 0..n {
            for j in 0..n {
                let m = src[self.grid.mirror(i) * n + self.grid.mirror(j)];
                self.values[i * n + j] = 0.5 * (src[i * n + j] + m.conj());
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

fn check_len(grid: &GridSpec, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(VfdmError::Config(format!(
            "array holds {len} samples, grid n={} needs {}",
            grid.n,
            grid.len()
        )));
    }
    Ok(())
}

/// `c0 * |f|^2 / sqrt(1 - rho^2)` on the support disk, 0 outside.
fn modification_factor(grid: &GridSpec, pattern: &AntennaPattern) -> Vec<f64> {
    let n = grid.n;
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            if grid.in_support(k, l) {
                let (x, y) = (grid.xi(k), grid.xi(l));
                out[k * n + l] = grid.c0 * pattern.power(x, y) / (1.0 - x * x - y * y).sqrt();
            }
        }
    }
    out
}

pub fn modify_bt(scene: &SceneImage, pattern: &AntennaPattern) -> Result<ModifiedBT> {
    scene.grid.validate()?;
    pattern.validate()?;
    let factor = modification_factor(&scene.grid, pattern);
    let values = scene.values.iter().zip(&factor).map(|(t, f)| t * f).collect();
    Ok(ModifiedBT {
        grid: scene.grid,
        values,
    })
}

#[derive(Debug, Clone)]
pub struct Demodified {
    pub scene: SceneImage,
    /// Samples that came out negative and were clamped to zero.
    pub clamped: usize,
}

pub fn demodify_bt(tm: &ModifiedBT, pattern: &AntennaPattern) -> Result<Demodified> {
    tm.grid.validate()?;
    pattern.validate()?;
    let factor = modification_factor(&tm.grid, pattern);
    let mut clamped = 0;
    let values = tm
        .values
        .iter()
        .zip(&factor)
        .map(|(&v, &f)| {
            if f == 0.0 {
                return 0.0;
            }
            let t = v / f;
            if t < 0.0 {
                clamped += 1;
                0.0
            } else {
                t
            }
        })
        .collect();
    Ok(Demodified {
        scene: SceneImage {
            grid: tm.grid,
            values,
        },
        clamped,
    })
}

/// In-place unnormalized 2-D DFT; `inverse` selects the `+j` kernel.
pub(crate) fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    fft.process(data);
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

#[inline]
fn checker(i: usize, j: usize) -> f64 {
    if (i + j).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `V(u_i, v_j) = dxi^2 * sum_{k,l} T_M(xi_k, eta_l) exp(-j 2 pi (u_i xi_k + v_j eta_l))`.
pub fn forward_visibility(tm: &ModifiedBT) -> VisibilityGrid {
    let g = tm.grid;
    let n = g.n;
    let mut buf: Vec<Complex64> = tm.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, n, false);
    let w = g.dxi() * g.dxi();
    let half = n / 2;
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let mi = (i + half) % n;
        for j in 0..n {
            let mj = (j + half) % n;
            values[i * n + j] = buf[mi * n + mj] * (w * checker(i, j));
        }
    }
    VisibilityGrid {
        grid: g,
        values,
        role: VisRole::Clean,
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: ModifiedBT,
    /// Frobenius norm of the discarded imaginary part over that of the real part.
    pub imag_residual: f64,
    /// Set when `imag_residual` exceeds [`IMAG_RESIDUAL_LIMIT`].
    pub non_hermitian: bool,
}

/// `T_M(xi_k, eta_l) = ds * sum_{i,j} V(u_i, v_j) exp(+j 2 pi (u_i xi_k + v_j eta_l))`, real part.
pub fn inverse_bt(vis: &VisibilityGrid) -> Reconstruction {
    let g = vis.grid;
    let n = g.n;
    let half = n / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let mi = (i + half) % n;
        for j in 0..n {
            let mj = (j + half) % n;
            buf[mi * n + mj] = vis.values[i * n + j] * checker(i, j);
        }
    }
    fft2(&mut buf, n, true);
    let ds = g.ds();
    let mut re2 = 0.0;
    let mut im2 = 0.0;
    let values = buf
        .iter()
        .map(|c| {
            let c = c * ds;
            re2 += c.re * c.re;
            im2 += c.im * c.im;
            c.re
        })
        .collect();
    let imag_residual = if re2 > 0.0 {
        (im2 / re2).sqrt()
    } else if im2 > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Reconstruction {
        image: ModifiedBT { grid: g, values },
        imag_residual,
        non_hermitian: imag_residual > IMAG_RESIDUAL_LIMIT,
    }
}

/// Visibility of a single point emitter: `p * dxi^2 * exp(-j 2 pi (u xi0 + v eta0))`.
///
/// The result is the outer product of two steering vectors, so it is rank one
/// as a matrix whether or not the position falls on a pixel.
pub fn point_source_visibility(src: &RfiSource, grid: &GridSpec) -> Result<VisibilityGrid> {
    grid.validate()?;
    let r2 = src.xi0 * src.xi0 + src.eta0 * src.eta0;
    if !(r2 <= 1.0) {
        return Err(VfdmError::Domain(format!(
            "source at ({}, {}) lies outside the unit disk",
            src.xi0, src.eta0
        )));
    }
    let n = grid.n;
    let steer = |c: f64| -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::from_polar(1.0, -2.0 * PI * grid.u(i) * c))
            .collect()
    };
    let a = steer(src.xi0);
    let b = steer(src.eta0);
    let amp = src.peak_bt * grid.dxi() * grid.dxi();
    let mut values = Vec::with_capacity(n * n);
    for ai in &a {
        for bj in &b {
            values.push(ai * bj * amp);
        }
    }
    Ok(VisibilityGrid {
        grid: *grid,
        values,
        role: VisRole::Rfi,
    })
}

/// Reads the visibility grid as the covariance matrix `[R]_{ij} = V(u_i, v_j)`.
pub fn as_covariance_matrix(vis: &VisibilityGrid) -> DMatrix<Complex64> {
    let n = vis.grid.n;
    DMatrix::from_row_slice(n, n, &vis.values)
}

pub fn from_covariance_matrix(
    grid: GridSpec,
    mat: &DMatrix<Complex64>,
    role: VisRole,
) -> Result<VisibilityGrid> {
    if mat.nrows() != grid.n || mat.ncols() != grid.n {
        return Err(VfdmError::Config(format!(
            "matrix is {}x{}, grid needs {}x{}",
            mat.nrows(),
            mat.ncols(),
            grid.n,
            grid.n
        )));
    }
    let n = grid.n;
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            values.push(mat[(i, j)]);
        }
    }
    Ok(VisibilityGrid { grid, values, role })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{Regime, RfiSource};

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn modify_zero_and_boresight() {
        let g = grid();
        let z = SceneImage::zeros(g);
        assert!(modify_bt(&z, &AntennaPattern::Uniform).unwrap().values.iter().all(|&v| v == 0.0));

        let mut s = SceneImage::zeros(g);
        s.values[16 * 32 + 16] = 200.0;
        let tm = modify_bt(&s, &AntennaPattern::Uniform).unwrap();
        assert_eq!(tm.at(16, 16), 200.0);
    }

    #[test]
    fn modify_obliquity_at_rho_08() {
        // rho^2 = 0.64 needs xi = -0.8 on a pixel; n = 40 puts it at k = 4.
        let g = GridSpec::new(40).unwrap();
        let k = 4;
        let l = 20;
        assert!((g.xi(k) + 0.8).abs() < 1e-15 && g.xi(l) == 0.0);
        let mut s = SceneImage::zeros(g);
        s.values[k * 40 + l] = 200.0;
        let tm = modify_bt(&s, &AntennaPattern::Uniform).unwrap();
        let expect = 200.0 / 0.36f64.sqrt();
        assert!((tm.at(k, l) - expect).abs() < 1e-9 * expect);
        assert!((tm.at(k, l) - 333.333_333_333_333).abs() < 1e-9);

        let back = demodify_bt(&tm, &AntennaPattern::Uniform).unwrap();
        assert!((back.scene.at(k, l) - 200.0).abs() < 1e-10);
        assert_eq!(back.clamped, 0);
    }

    #[test]
    fn demodify_clamps_negatives() {
        let g = grid();
        let mut tm = ModifiedBT::zeros(g);
        tm.values[16 * 32 + 16] = -3.0;
        tm.values[16 * 32 + 17] = 5.0;
        let out = demodify_bt(&tm, &AntennaPattern::gaussian()).unwrap();
        assert_eq!(out.clamped, 1);
        assert_eq!(out.scene.at(16, 16), 0.0);
        assert!(out.scene.at(16, 17) > 0.0);
    }

    #[test]
    fn outside_support_is_zero() {
        let g = grid();
        let s = SceneImage {
            grid: g,
            values: vec![100.0; g.len()],
        };
        let tm = modify_bt(&s, &AntennaPattern::gaussian()).unwrap();
        for k in 0..32 {
            for l in 0..32 {
                if !g.in_support(k, l) {
                    assert_eq!(tm.at(k, l), 0.0);
                } else {
                    assert!(tm.at(k, l) > 0.0);
                }
            }
        }
    }

    #[test]
    fn impulse_at_origin_is_flat() {
        let g = grid();
        let mut tm = ModifiedBT::zeros(g);
        tm.values[16 * 32 + 16] = 1.0;
        let v = forward_visibility(&tm);
        for c in &v.values {
            assert!((c.re - 3.90625e-3).abs() < 1e-15 && c.im.abs() < 1e-15);
        }
    }

    #[test]
    fn constant_visibility_inverts_to_impulse() {
        let g = grid();
        let v = VisibilityGrid {
            grid: g,
            values: vec![Complex64::new(1.0, 0.0); g.len()],
            role: VisRole::Dirty,
        };
        let r = inverse_bt(&v);
        for k in 0..32 {
            for l in 0..32 {
                let want = if (k, l) == (16, 16) { 256.0 } else { 0.0 };
                assert!((r.image.at(k, l) - want).abs() < 1e-10);
            }
        }
        assert!(!r.non_hermitian);
    }

    #[test]
    fn non_hermitian_input_is_flagged() {
        let g = grid();
        let mut v = VisibilityGrid::zeros(g, VisRole::Dirty);
        v.values[3 * 32 + 5] = Complex64::new(1.0, 0.0);
        let r = inverse_bt(&v);
        assert!(r.non_hermitian);
        v.hermitian_symmetrize();
        assert!(v.hermitian_error() < 1e-15);
        assert!(!inverse_bt(&v).non_hermitian);
    }

    #[test]
    fn point_source_rejects_outside_disk() {
        let src = RfiSource {
            xi0: 0.9,
            eta0: 0.9,
            peak_bt: 1e3,
            regime: Regime::Weak,
        };
        assert!(matches!(
            point_source_visibility(&src, &grid()),
            Err(VfdmError::Domain(_))
        ));
    }

    #[test]
    fn covariance_view_round_trip() {
        let g = grid();
        let z = VisibilityGrid::zeros(g, VisRole::Clean);
        assert!(as_covariance_matrix(&z).iter().all(|c| c.norm() == 0.0));
        let mut v = VisibilityGrid::zeros(g, VisRole::Dirty);
        for (p, c) in v.values.iter_mut().enumerate() {
            *c = Complex64::new(p as f64, -(p as f64) * 0.5);
        }
        let m = as_covariance_matrix(&v);
        assert_eq!(m[(2, 7)], v.at(2, 7));
        let back = from_covariance_matrix(g, &m, VisRole::Dirty).unwrap();
        assert_eq!(back, v);
    }
}
