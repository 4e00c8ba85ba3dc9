//! Classical RFI mitigation: iterative point-source cancellation (CLEAN) and
//! robust PCA on the covariance view of the visibility grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfdmError};
use crate::grid::GridSpec;
use crate::signal::{as_covariance_matrix, from_covariance_matrix, inverse_bt, point_source_visibility, VisRole, VisibilityGrid};
use crate::simulate::{Regime, RegimeRanges, RfiSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanConfig {
    #[serde(default = "d_gain")]
    pub loop_gain: f64,
    #[serde(default = "d_iters")]
    pub max_iters: usize,
    /// Detection threshold in standard deviations (over the support) above the median.
    /// MAD is too small on bimodal land/sea scenes, so the plain deviation is used.
    #[serde(default = "d_k")]
    pub threshold: f64,
    #[serde(default = "d_refine")]
    pub refine: bool,
}

fn d_gain() -> f64 {
    0.2
}
fn d_iters() -> usize {
    200
}
fn d_k() -> f64 {
    8.0
}
fn d_refine() -> bool {
    true
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            loop_gain: d_gain(),
            max_iters: d_iters(),
            threshold: d_k(),
            refine: d_refine(),
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.loop_gain > 0.0 && self.loop_gain <= 1.0) {
            return Err(VfdmError::Config(format!("loop gain must lie in (0, 1], got {}", self.loop_gain)));
        }
        if !(self.threshold > 0.0) {
            return Err(VfdmError::Config(format!("threshold must be positive, got {}", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CleanResult {
    pub estimate: VisibilityGrid,
    pub detections: Vec<RfiSource>,
    /// Every subtracted component, in order.
    pub components: Vec<RfiSource>,
    /// Sum of subtracted component visibilities; `estimate + subtracted = dirty`.
    pub subtracted: VisibilityGrid,
    /// Residual image peak before each accepted iteration, then the final one.
    pub peaks: Vec<f64>,
    pub iterations: usize,
    /// Stopped at `max_iters` with the peak still above threshold.
    pub unconverged: bool,
}

fn median(values: &mut [f64]) -> f64 {
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let hi = *m;
    if values.len() % 2 == 1 {
        hi
    } else {
        let lo = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

struct Peak {
    k: usize,
    l: usize,
    value: f64,
    threshold: f64,
    median: f64,
}

fn find_peak(img: &[f64], grid: &GridSpec, k_sigma: f64) -> Peak {
    let n = grid.n;
    let mut support = Vec::with_capacity(n * n);
    let mut best = (0, f64::NEG_INFINITY);
    for (p, &v) in img.iter().enumerate() {
        if grid.in_support(p / n, p % n) {
            support.push(v);
            if v > best.1 {
                best = (p, v);
            }
        }
    }
    let count = support.len() as f64;
    let mean = support.iter().sum::<f64>() / count;
    let sd = (support.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count).sqrt();
    let med = median(&mut support);
    Peak {
        k: best.0 / n,
        l: best.0 % n,
        value: best.1,
        threshold: med + k_sigma * sd,
        median: med,
    }
}

/// Vertex offset (in pixels, within +-0.5) and height of the parabola through three samples.
fn parabola(a: f64, b: f64, c: f64) -> (f64, f64) {
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return (0.0, b);
    }
    let off = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    (off, b - 0.25 * (a - c) * off)
}

fn residual_image(vis: &VisibilityGrid) -> Vec<f64> {
    inverse_bt(vis).image.values
}

/// Detects and subtracts point-like emitters from the dirty grid.
pub fn clean_mitigate(dirty: &VisibilityGrid, cfg: &CleanConfig) -> Result<CleanResult> {
    cfg.validate()?;
    let grid = dirty.grid;
    grid.validate()?;
    let n = grid.n;
    let ranges = RegimeRanges::default();
    let mut residual = dirty.clone();
    let mut subtracted = VisibilityGrid::zeros(grid, VisRole::Rfi);
    let mut components = Vec::new();
    let mut img = residual_image(&residual);
    let mut peak = find_peak(&img, &grid, cfg.threshold);
    let mut peaks = vec![peak.value];
    let mut unconverged = false;
    let mut iterations = 0;
    loop {
        if peak.value < peak.threshold {
            break;
        }
        if iterations == cfg.max_iters {
            unconverged = true;
            break;
        }
        let (mut xi, mut eta, mut height) = (grid.xi(peak.k), grid.xi(peak.l), peak.value);
        if cfg.refine {
            let at = |k: usize, l: usize| img[(k % n) * n + l % n];
            let (k, l) = (peak.k, peak.l);
            let (dk, hk) = parabola(at(k + n - 1, l), peak.value, at(k + 1, l));
            let (dl, hl) = parabola(at(k, l + n - 1), peak.value, at(k, l + 1));
            xi += dk * grid.dxi();
            eta += dl * grid.dxi();
            height = hk.max(hl);
        }
        let r = (xi * xi + eta * eta).sqrt();
        if r > 1.0 {
            xi /= r;
            eta /= r;
        }
        let amp = cfg.loop_gain * (height - peak.median);
        let comp = RfiSource {
            xi0: xi,
            eta0: eta,
            peak_bt: amp,
            regime: ranges.classify(amp.max(ranges.weak.0)),
        };
        let vis = point_source_visibility(&comp, &grid)?;
        let mut trial = residual.clone();
        for (t, v) in trial.values.iter_mut().zip(&vis.values) {
            *t -= v;
        }
        trial.hermitian_symmetrize();
        let trial_img = residual_image(&trial);
        let next = find_peak(&trial_img, &grid, cfg.threshold);
        if next.value > peak.value + 1e-9 * peak.value.abs().max(1.0) {
            // a component that raises the peak is rejected and the loop ends
            break;
        }
        for (s, v) in subtracted.values.iter_mut().zip(&vis.values) {
            *s += v;
        }
        residual = trial;
        img = trial_img;
        peak = next;
        peaks.push(peak.value);
        components.push(comp);
        iterations += 1;
    }
    let estimate = if components.is_empty() {
        dirty.clone().with_role(VisRole::Estimate)
    } else {
        subtracted.hermitian_symmetrize();
        // dirty grids are Hermitian, so this equals the projected running residual
        let values = dirty.values.iter().zip(&subtracted.values).map(|(d, s)| d - s).collect();
        VisibilityGrid::from_values(grid, values, VisRole::Estimate)?
    };
    Ok(CleanResult {
        estimate,
        detections: merge_detections(&components, &grid, &ranges),
        components,
        subtracted,
        peaks,
        iterations,
        unconverged,
    })
}

/// Clusters components lying within one pixel of each other.
fn merge_detections(components: &[RfiSource], grid: &GridSpec, ranges: &RegimeRanges) -> Vec<RfiSource> {
    let mut clusters: Vec<(f64, f64, f64)> = Vec::new();
    for c in components {
        let hit = clusters.iter_mut().find(|(x, y, w)| {
            let (cx, cy) = (x / w, y / w);
            ((cx - c.xi0).powi(2) + (cy - c.eta0).powi(2)).sqrt() <= grid.dxi()
        });
        match hit {
            Some((x, y, w)) => {
                *x += c.xi0 * c.peak_bt;
                *y += c.eta0 * c.peak_bt;
                *w += c.peak_bt;
            }
            None => clusters.push((c.xi0 * c.peak_bt, c.eta0 * c.peak_bt, c.peak_bt)),
        }
    }
    clusters
        .into_iter()
        .map(|(x, y, w)| RfiSource {
            xi0: x / w,
            eta0: y / w,
            peak_bt: w,
            regime: if w >= ranges.weak.0 { ranges.classify(w) } else { Regime::Weak },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpcaConfig {
    /// Sparse weight; `None` means `1 / sqrt(n)`.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "d_tol")]
    pub tolerance: f64,
    #[serde(default = "d_rpca_iters")]
    pub max_iters: usize,
}

fn d_tol() -> f64 {
    1e-6
}
fn d_rpca_iters() -> usize {
    500
}

impl Default for RpcaConfig {
    fn default() -> Self {
        RpcaConfig {
            lambda: None,
            tolerance: d_tol(),
            max_iters: d_rpca_iters(),
        }
    }
}

impl RpcaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_some_and(|l| !(l > 0.0)) || !(self.tolerance > 0.0) || self.max_iters == 0 {
            return Err(VfdmError::Config("RPCA lambda, tolerance and max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PcpResult {
    pub low_rank: DMatrix<Complex64>,
    pub sparse: DMatrix<Complex64>,
    pub iterations: usize,
    /// `||M - L - S||_F / ||M||_F` at exit.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RpcaResult {
    pub estimate: VisibilityGrid,
    pub low_rank: VisibilityGrid,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn shrink(z: Complex64, tau: f64) -> Complex64 {
    let m = z.norm();
    if m <= tau {
        Complex64::new(0.0, 0.0)
    } else {
        z * ((m - tau) / m)
    }
}

/// Singular-value thresholding; singular values at or below `tau` become exactly zero.
fn svt(m: &DMatrix<Complex64>, tau: f64) -> DMatrix<Complex64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let vt = svd.v_t.expect("right vectors requested");
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tau {
            let w = Complex64::new(s - tau, 0.0);
            out += (u.column(i) * w) * vt.row(i);
        }
    }
    out
}

/// Principal component pursuit by the inexact augmented Lagrangian method.
pub fn pcp(m: &DMatrix<Complex64>, cfg: &RpcaConfig) -> Result<PcpResult> {
    let (rows, cols) = m.shape();
    let lambda = cfg.lambda.unwrap_or(1.0 / (rows.max(cols) as f64).sqrt());
    if !(lambda > 0.0) || !(cfg.tolerance > 0.0) {
        return Err(VfdmError::Config("RPCA lambda and tolerance must be positive".into()));
    }
    let norm_m = m.norm();
    let zeros = DMatrix::zeros(rows, cols);
    if norm_m == 0.0 {
        return Ok(PcpResult {
            low_rank: zeros.clone(),
            sparse: zeros,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let spectral = m.clone().singular_values()[0];
    let inf = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut y = m / Complex64::new(spectral.max(inf / lambda), 0.0);
    let mut mu = 1.25 / spectral;
    let mu_max = mu * 1e7;
    let rho = 1.5;
    let mut l = zeros.clone();
    let mut s = zeros;
    let mut residual = 1.0;
    for it in 1..=cfg.max_iters {
        let inv = Complex64::new(1.0 / mu, 0.0);
        l = svt(&(m - &s + &y * inv), 1.0 / mu);
        s = (m - &l + &y * inv).map(|z| shrink(z, lambda / mu));
        let z = m - &l - &s;
        residual = z.norm() / norm_m;
        if residual < cfg.tolerance {
            return Ok(PcpResult {
                low_rank: l,
                sparse: s,
                iterations: it,
                residual,
                converged: true,
            });
        }
        y += z * Complex64::new(mu, 0.0);
        mu = (mu * rho).min(mu_max);
    }
    Ok(PcpResult {
        low_rank: l,
        sparse: s,
        iterations: cfg.max_iters,
        residual,
        converged: false,
    })
}

/// Attributes the low-rank part of the covariance view to RFI and removes it.
pub fn rpca_mitigate(dirty: &VisibilityGrid, cfg: &RpcaConfig) -> Result<RpcaResult> {
    let grid = dirty.grid;
    let m = as_covariance_matrix(dirty);
    let res = pcp(&m, cfg)?;
    let low_rank = from_covariance_matrix(grid, &res.low_rank, VisRole::Rfi)?;
    let values = dirty.values.iter().zip(&low_rank.values).map(|(d, l)| d - l).collect();
    let mut estimate = VisibilityGrid::from_values(grid, values, VisRole::Estimate)?;
    estimate.hermitian_symmetrize();
    Ok(RpcaResult {
        estimate,
        low_rank,
        iterations: res.iterations,
        residual: res.residual,
        converged: res.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_vertex() {
        // samples of -(x - 0.3)^2 at -1, 0, 1
        let f = |x: f64| -(x - 0.3) * (x - 0.3);
        let (off, h) = parabola(f(-1.0), f(0.0), f(1.0));
        assert!((off - 0.3).abs() < 1e-12);
        assert!(h.abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn zero_matrix_decomposes_to_zero() {
        let m = DMatrix::<Complex64>::zeros(6, 6);
        let r = pcp(&m, &RpcaConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.low_rank.norm(), 0.0);
        assert_eq!(r.sparse.norm(), 0.0);
    }

    #[test]
    fn bad_configs() {
        let c = CleanConfig {
            loop_gain: 0.0,
            ..CleanConfig::default()
        };
        assert!(c.validate().is_err());
        let m = DMatrix::<Complex64>::identity(4, 4);
        let r = RpcaConfig {
            lambda: Some(-1.0),
            ..RpcaConfig::default()
        };
        assert!(pcp(&m, &r).is_err());
    }
}
