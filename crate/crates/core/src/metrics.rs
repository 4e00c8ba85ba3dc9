//! Image-quality metrics on reconstructed brightness-temperature maps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VfdmError};
use crate::grid::GridSpec;
use crate::signal::{demodify_bt, inverse_bt, AntennaPattern, SceneImage, VisibilityGrid};
use crate::simulate::{Mask, RfiMode};

pub const DEFAULT_EVAL_RADIUS: f64 = 0.7;

const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;

/// Pixels inside a direction-cosine disk; metrics are averaged over it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRegion {
    pub grid: GridSpec,
    pub radius: f64,
    pub inside: Vec<bool>,
}

impl EvalRegion {
    pub fn disk(grid: GridSpec, radius: f64) -> Result<Self> {
        grid.validate()?;
        if !(radius > 0.0 && radius <= grid.support_radius) {
            return Err(VfdmError::Config(format!(
                "evaluation radius {radius} must lie in (0, {}]",
                grid.support_radius
            )));
        }
        let n = grid.n;
        let inside: Vec<bool> = (0..n * n)
            .map(|p| {
                let (x, y) = (grid.xi(p / n), grid.xi(p % n));
                x * x + y * y <= radius * radius
            })
            .collect();
        if !inside.iter().any(|&b| b) {
            return Err(VfdmError::Config(format!("evaluation disk of radius {radius} holds no pixel")));
        }
        Ok(EvalRegion { grid, radius, inside })
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    fn check(&self, a: &SceneImage, b: &SceneImage) -> Result<()> {
        self.grid.same_as(&a.grid)?;
        self.grid.same_as(&b.grid)
    }
}

pub fn rmse(pred: &SceneImage, truth: &SceneImage, region: &EvalRegion) -> Result<f64> {
    region.check(pred, truth)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((p, t), &inside) in pred.values.iter().zip(&truth.values).zip(&region.inside) {
        if inside {
            sum += (p - t) * (p - t);
            count += 1;
        }
    }
    if count == 0 {
        return Err(VfdmError::Domain("empty evaluation region".into()));
    }
    Ok((sum / count as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ssim {
    pub value: f64,
    /// The reference is constant on the region; `L = 1` was used.
    pub fallback: bool,
}

fn gaussian_window() -> Vec<f64> {
    let w = 2 * SSIM_RADIUS + 1;
    let mut k: Vec<f64> = (0..w * w)
        .map(|p| {
            let (dy, dx) = ((p / w) as f64 - SSIM_RADIUS as f64, (p % w) as f64 - SSIM_RADIUS as f64);
            (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Gaussian-windowed SSIM averaged over region pixels whose whole window is in the region.
pub fn ssim(pred: &SceneImage, truth: &SceneImage, region: &EvalRegion) -> Result<Ssim> {
    region.check(pred, truth)?;
    let n = region.grid.n;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut equal = true;
    for ((p, t), &inside) in pred.values.iter().zip(&truth.values).zip(&region.inside) {
        if inside {
            lo = lo.min(*t);
            hi = hi.max(*t);
            equal &= p == t;
        }
    }
    let mut range = hi - lo;
    let fallback = range == 0.0;
    if fallback {
        if equal {
            return Ok(Ssim { value: 1.0, fallback });
        }
        range = 1.0;
    }
    let (c1, c2) = ((SSIM_K1 * range).powi(2), (SSIM_K2 * range).powi(2));
    let win = gaussian_window();
    let r = SSIM_RADIUS as isize;
    let w = 2 * SSIM_RADIUS + 1;
    let mut total = 0.0;
    let mut count = 0usize;
    for k in 0..n as isize {
        'centre: for l in 0..n as isize {
            let mut acc = [0.0f64; 5];
            for dy in -r..=r {
                for dx in -r..=r {
                    let (y, x) = (k + dy, l + dx);
                    if y < 0 || x < 0 || y >= n as isize || x >= n as isize {
                        continue 'centre;
                    }
                    let p = y as usize * n + x as usize;
                    if !region.inside[p] {
                        continue 'centre;
                    }
                    let wt = win[(dy + r) as usize * w + (dx + r) as usize];
                    let (a, b) = (pred.values[p], truth.values[p]);
                    acc[0] += wt * a;
                    acc[1] += wt * b;
                    acc[2] += wt * a * a;
                    acc[3] += wt * b * b;
                    acc[4] += wt * a * b;
                }
            }
            let (ma, mb) = (acc[0], acc[1]);
            let va = acc[2] - ma * ma;
            let vb = acc[3] - mb * mb;
            let cov = acc[4] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    if count == 0 {
        return Err(VfdmError::Domain(format!(
            "no {w}x{w} SSIM window fits inside the evaluation region"
        )));
    }
    Ok(Ssim {
        value: total / count as f64,
        fallback,
    })
}

/// Gradient magnitude with forward differences and replicate boundary.
fn gradient_magnitude(img: &SceneImage) -> Vec<f64> {
    let n = img.grid.n;
    let v = &img.values;
    (0..n * n)
        .map(|p| {
            let (k, l) = (p / n, p % n);
            let dx = if k + 1 < n { v[p + n] - v[p] } else { 0.0 };
            let dy = if l + 1 < n { v[p + 1] - v[p] } else { 0.0 };
            (dx * dx + dy * dy).sqrt()
        })
        .collect()
}

/// Reference-free error: RMS fidelity to the dirty map on clean pixels plus
/// half the mean gradient magnitude of the prediction inside the RFI footprint.
pub fn tre(pred: &SceneImage, dirty: &SceneImage, mask: &Mask) -> Result<f64> {
    pred.grid.same_as(&dirty.grid)?;
    pred.grid.same_as(&mask.grid)?;
    let ones = mask.one_count();
    let zeros = mask.zero_count();
    if ones == 0 || zeros == 0 {
        return Err(VfdmError::Domain(format!(
            "TRE needs both mask classes, got {ones} ones and {zeros} zeros"
        )));
    }
    let grad = gradient_magnitude(pred);
    let mut fid = 0.0;
    let mut smooth = 0.0;
    for (p, &m) in mask.values.iter().enumerate() {
        if m != 0 {
            let d = dirty.values[p] - pred.values[p];
            fid += d * d;
        } else {
            smooth += grad[p];
        }
    }
    Ok((fid / ones as f64).sqrt() + smooth / (2.0 * zeros as f64))
}

/// Brightness-temperature map of a visibility grid.
pub fn reconstruct(vis: &VisibilityGrid, pattern: &AntennaPattern) -> Result<SceneImage> {
    Ok(demodify_bt(&inverse_bt(vis).image, pattern)?.scene)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub id: u64,
    pub mode: RfiMode,
    pub source_count: u8,
    pub method: String,
    pub rmse_k: f64,
    pub ssim: f64,
    /// `None` when the mask has a single class and TRE is undefined.
    pub tre_k: Option<f64>,
}

/// Scores one estimate against the clean truth and the dirty input.
#[allow(clippy::too_many_arguments)]
pub fn score_sample(
    id: u64,
    mode: RfiMode,
    source_count: u8,
    method: &str,
    estimate: &VisibilityGrid,
    clean: &VisibilityGrid,
    dirty: &VisibilityGrid,
    mask: &Mask,
    pattern: &AntennaPattern,
    region: &EvalRegion,
) -> Result<SampleReport> {
    let est = reconstruct(estimate, pattern)?;
    let truth = reconstruct(clean, pattern)?;
    let dirty_img = reconstruct(dirty, pattern)?;
    let tre_k = if mask.one_count() > 0 && mask.zero_count() > 0 {
        Some(tre(&est, &dirty_img, mask)?)
    } else {
        None
    };
    Ok(SampleReport {
        id,
        mode,
        source_count,
        method: method.to_string(),
        rmse_k: rmse(&est, &truth, region)?,
        ssim: ssim(&est, &truth, region)?.value,
        tre_k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub mode: RfiMode,
    pub count: usize,
    pub rmse_k: f64,
    pub ssim: f64,
    pub tre_k: Option<f64>,
}

/// Means per `(method, mode)` in sorted key order.
pub fn aggregate(reports: &[SampleReport]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, RfiMode), Vec<&SampleReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.method.clone(), r.mode)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, mode), rs)| {
            let c = rs.len() as f64;
            let tres: Vec<f64> = rs.iter().filter_map(|r| r.tre_k).collect();
            AggregateRow {
                method,
                mode,
                count: rs.len(),
                rmse_k: rs.iter().map(|r| r.rmse_k).sum::<f64>() / c,
                ssim: rs.iter().map(|r| r.ssim).sum::<f64>() / c,
                tre_k: (!tres.is_empty()).then(|| tres.iter().sum::<f64>() / tres.len() as f64),
            }
        })
        .collect()
}
