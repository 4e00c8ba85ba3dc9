//! Synthetic natural scenes and randomized RFI contamination.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfdmError};
use crate::grid::GridSpec;
use crate::signal::{fft2, point_source_visibility, SceneImage, VisRole, VisibilityGrid};

pub const MIN_SCENE_BT: f64 = 80.0;
pub const MAX_SCENE_BT: f64 = 320.0;
pub const MAX_SOURCES: usize = 8;

const NOISE_STREAM: u64 = 0x6e_6f69_7365;

/// SplitMix64 finalizer over `(master, index)`; used for per-sample seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Weak,
    Medium,
    Strong,
    VeryStrong,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Weak, Regime::Medium, Regime::Strong, Regime::VeryStrong];

    pub fn is_strong(self) -> bool {
        matches!(self, Regime::Strong | Regime::VeryStrong)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfiMode {
    Weak,
    Medium,
    Strong,
    VeryStrong,
    Hybrid,
}

impl RfiMode {
    pub const ALL: [RfiMode; 5] = [
        RfiMode::Weak,
        RfiMode::Medium,
        RfiMode::Strong,
        RfiMode::VeryStrong,
        RfiMode::Hybrid,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<RfiMode> {
        RfiMode::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RfiMode::Weak => "weak",
            RfiMode::Medium => "medium",
            RfiMode::Strong => "strong",
            RfiMode::VeryStrong => "very_strong",
            RfiMode::Hybrid => "hybrid",
        }
    }

    fn single_regime(self) -> Option<Regime> {
        match self {
            RfiMode::Weak => Some(Regime::Weak),
            RfiMode::Medium => Some(Regime::Medium),
            RfiMode::Strong => Some(Regime::Strong),
            RfiMode::VeryStrong => Some(Regime::VeryStrong),
            RfiMode::Hybrid => None,
        }
    }
}

impl std::fmt::Display for RfiMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RfiMode {
    type Err = VfdmError;

    fn from_str(s: &str) -> Result<Self> {
        RfiMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| VfdmError::Config(format!("unknown RFI mode '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfiSource {
    pub xi0: f64,
    pub eta0: f64,
    /// Height the source adds to the dirty modified-BT image, in Kelvin.
    pub peak_bt: f64,
    pub regime: Regime,
}

/// Peak-BT bounds per regime. Consecutive regimes share an endpoint so the
/// four ranges partition `[weak.0, very_strong.1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeRanges {
    pub weak: (f64, f64),
    pub medium: (f64, f64),
    pub strong: (f64, f64),
    pub very_strong: (f64, f64),
}

impl Default for RegimeRanges {
    fn default() -> Self {
        RegimeRanges {
            weak: (5e2, 2e3),
            medium: (2e3, 1e4),
            strong: (1e4, 1e5),
            very_strong: (1e5, 1e6),
        }
    }
}

impl RegimeRanges {
    pub fn range(&self, r: Regime) -> (f64, f64) {
        match r {
            Regime::Weak => self.weak,
            Regime::Medium => self.medium,
            Regime::Strong => self.strong,
            Regime::VeryStrong => self.very_strong,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rs = [self.weak, self.medium, self.strong, self.very_strong];
        for (lo, hi) in rs {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(VfdmError::Config(format!("bad regime range ({lo}, {hi})")));
            }
        }
        for w in rs.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(VfdmError::Config(format!(
                    "regime ranges must be contiguous: {} != {}",
                    w[0].1, w[1].0
                )));
            }
        }
        Ok(())
    }

    /// Regime whose range contains `p`; values below the weak floor count as weak.
    pub fn classify(&self, p: f64) -> Regime {
        if p <= self.weak.1 {
            Regime::Weak
        } else if p <= self.medium.1 {
            Regime::Medium
        } else if p <= self.strong.1 {
            Regime::Strong
        } else {
            Regime::VeryStrong
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub ranges: RegimeRanges,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default = "default_mask_radius")]
    pub mask_radius: usize,
}

fn default_noise_std() -> f64 {
    0.05
}
fn default_mask_radius() -> usize {
    2
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ranges: RegimeRanges::default(),
            noise_std: default_noise_std(),
            mask_radius: default_mask_radius(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(VfdmError::Config(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if self.mask_radius < 1 {
            return Err(VfdmError::Config("mask radius must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfiScenario {
    pub sources: Vec<RfiSource>,
    pub mode: RfiMode,
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    SmoothField,
    Coastline,
    Blobs,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [SceneKind::SmoothField, SceneKind::Coastline, SceneKind::Blobs];
}

impl std::str::FromStr for SceneKind {
    type Err = VfdmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth_field" => Ok(SceneKind::SmoothField),
            "coastline" => Ok(SceneKind::Coastline),
            "blobs" => Ok(SceneKind::Blobs),
            other => Err(VfdmError::Config(format!("unknown scene kind '{other}'"))),
        }
    }
}

/// Real Gaussian random field with isotropic power spectrum `|k|^exponent`,
/// standardized to zero mean and unit variance. Periodic on the `n x n` grid.
pub fn power_law_field<R: Rng>(rng: &mut R, n: usize, exponent: f64) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for a in 0..n {
        let ka = if a <= n / 2 { a as f64 } else { a as f64 - n as f64 };
        for b in 0..n {
            let kb = if b <= n / 2 { b as f64 } else { b as f64 - n as f64 };
            let k = (ka * ka + kb * kb).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            if k > 0.0 {
                buf[a * n + b] = Complex64::new(re, im) * k.powf(exponent / 2.0);
            }
        }
    }
    fft2(&mut buf, n, true);
    let mut field: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = field.iter().sum::<f64>() / field.len() as f64;
    let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / field.len() as f64;
    let sd = var.sqrt().max(f64::MIN_POSITIVE);
    for v in &mut field {
        *v = (*v - mean) / sd;
    }
    field
}

pub fn synth_scene(kind: SceneKind, seed: u64, grid: &GridSpec) -> Result<SceneImage> {
    grid.validate()?;
    let n = grid.n;
    let mut rng = rng_from(seed);
    let mut values = vec![0.0; n * n];
    match kind {
        SceneKind::SmoothField => {
            let z = power_law_field(&mut rng, n, -2.5);
            let mean = rng.random_range(180.0..240.0);
            let sd = rng.random_range(25.0..45.0);
            for (v, z) in values.iter_mut().zip(&z) {
                *v = mean + sd * z;
            }
        }
        SceneKind::Coastline => {
            let theta = rng.random_range(0.0..2.0 * PI);
            let offset = rng.random_range(-0.4..0.4);
            let sea = 100.0 + rng.random_range(-5.0..5.0);
            let land = 270.0 + rng.random_range(-10.0..10.0);
            let wiggles: Vec<(f64, f64, f64)> = (1..=3)
                .map(|m| {
                    let m = m as f64;
                    (rng.random_range(0.0..0.08) / m, m * rng.random_range(1.5..3.5), rng.random_range(0.0..2.0 * PI))
                })
                .collect();
            let (c, s) = (theta.cos(), theta.sin());
            for k in 0..n {
                for l in 0..n {
                    let (x, y) = (grid.xi(k), grid.xi(l));
                    let along = -x * s + y * c;
                    let bend: f64 = wiggles.iter().map(|(a, w, p)| a * (w * along + p).sin()).sum();
                    let d = x * c + y * s - offset + bend;
                    let w = 0.5 * (1.0 + (d / 0.03).tanh());
                    values[k * n + l] = sea + (land - sea) * w;
                }
            }
        }
        SceneKind::Blobs => {
            let count = rng.random_range(3..=6);
            let blobs: Vec<(f64, f64, f64, f64)> = (0..count)
                .map(|_| {
                    let r = 0.8 * rng.random::<f64>().sqrt();
                    let a = rng.random_range(0.0..2.0 * PI);
                    (r * a.cos(), r * a.sin(), rng.random_range(20.0..100.0), rng.random_range(0.05..0.2))
                })
                .collect();
            for k in 0..n {
                for l in 0..n {
                    let (x, y) = (grid.xi(k), grid.xi(l));
                    values[k * n + l] = 150.0
                        + blobs
                            .iter()
                            .map(|(cx, cy, amp, w)| {
                                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                                amp * (-d2 / (2.0 * w * w)).exp()
                            })
                            .sum::<f64>();
                }
            }
        }
    }
    for k in 0..n {
        for l in 0..n {
            let v = &mut values[k * n + l];
            *v = if grid.in_support(k, l) {
                v.clamp(MIN_SCENE_BT, MAX_SCENE_BT)
            } else {
                0.0
            };
        }
    }
    Ok(SceneImage { grid: *grid, values })
}

fn draw_source<R: Rng>(rng: &mut R, regime: Regime, cfg: &SimConfig, grid: &GridSpec) -> RfiSource {
    let r = grid.support_radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..2.0 * PI);
    let (lo, hi) = cfg.ranges.range(regime);
    let peak_bt = (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp().clamp(lo, hi);
    RfiSource {
        xi0: r * a.cos(),
        eta0: r * a.sin(),
        peak_bt,
        regime,
    }
}

/// Draws a randomized RFI configuration for one sample.
///
/// Single-regime modes use 1 to 8 sources. Hybrid scenes need at least one
/// strong-or-stronger and one medium-or-weaker source, so they use 2 to 8.
pub fn sample_rfi_scenario(mode: RfiMode, seed: u64, cfg: &SimConfig, grid: &GridSpec) -> RfiScenario {
    let mut rng = rng_from(seed);
    let sources = match mode.single_regime() {
        Some(regime) => {
            let count = rng.random_range(1..=MAX_SOURCES);
            (0..count).map(|_| draw_source(&mut rng, regime, cfg, grid)).collect()
        }
        None => {
            let count = rng.random_range(2..=MAX_SOURCES);
            let mut regimes = vec![
                if rng.random::<bool>() { Regime::Strong } else { Regime::VeryStrong },
                if rng.random::<bool>() { Regime::Weak } else { Regime::Medium },
            ];
            while regimes.len() < count {
                regimes.push(Regime::ALL[rng.random_range(0..4)]);
            }
            regimes.shuffle(&mut rng);
            regimes.into_iter().map(|r| draw_source(&mut rng, r, cfg, grid)).collect()
        }
    };
    RfiScenario {
        sources,
        mode,
        noise_std: cfg.noise_std,
        seed,
    }
}

/// Sum of the point-source visibilities, projected onto the Hermitian subspace.
///
/// An off-grid source is not exactly Hermitian on the Nyquist row and column
/// of an even grid; the projection only touches those samples.
pub fn rfi_visibility(sources: &[RfiSource], grid: &GridSpec) -> Result<VisibilityGrid> {
    let mut total = VisibilityGrid::zeros(*grid, VisRole::Rfi);
    for src in sources {
        let v = point_source_visibility(src, grid)?;
        for (t, s) in total.values.iter_mut().zip(&v.values) {
            *t += s;
        }
    }
    total.hermitian_symmetrize();
    Ok(total)
}

/// Hermitian-symmetric complex Gaussian noise with `E|n|^2 = std^2` per sample.
pub fn receiver_noise(grid: &GridSpec, std: f64, seed: u64) -> VisibilityGrid {
    let n = grid.n;
    let mut rng = rng_from(derive_seed(seed, NOISE_STREAM));
    let raw: Vec<Complex64> = (0..n * n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (std / 2f64.sqrt())
        })
        .collect();
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let p = i * n + j;
            let q = grid.mirror(i) * n + grid.mirror(j);
            if p == q {
                values[p] = Complex64::new(raw[p].re * 2f64.sqrt(), 0.0);
            } else if p < q {
                let v = (raw[p] + raw[q].conj()) / 2f64.sqrt();
                values[p] = v;
                values[q] = v.conj();
            }
        }
    }
    VisibilityGrid {
        grid: *grid,
        values,
        role: VisRole::Dirty,
    }
}

/// `dirty = clean + sum_i V_I(src_i) + noise`.
pub fn inject(clean: &VisibilityGrid, scen: &RfiScenario) -> Result<VisibilityGrid> {
    if clean.role != VisRole::Clean {
        return Err(VfdmError::Config(format!(
            "inject expects a clean visibility grid, got {:?}",
            clean.role
        )));
    }
    if scen.sources.len() > MAX_SOURCES {
        return Err(VfdmError::Config(format!(
            "scenario has {} sources, at most {MAX_SOURCES} allowed",
            scen.sources.len()
        )));
    }
    let grid = clean.grid;
    let mut dirty = clean.clone().with_role(VisRole::Dirty);
    if !scen.sources.is_empty() {
        let rfi = rfi_visibility(&scen.sources, &grid)?;
        for (d, r) in dirty.values.iter_mut().zip(&rfi.values) {
            *d += r;
        }
    }
    if scen.noise_std > 0.0 {
        let noise = receiver_noise(&grid, scen.noise_std * grid.dxi() * grid.dxi(), scen.seed);
        for (d, e) in dirty.values.iter_mut().zip(&noise.values) {
            *d += e;
        }
    }
    Ok(dirty)
}

/// Binary mask: 1 on uncontaminated pixels, 0 within the RFI footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub grid: GridSpec,
    pub values: Vec<u8>,
}

impl Mask {
    pub fn ones(grid: GridSpec) -> Self {
        Mask {
            grid,
            values: vec![1; grid.len()],
        }
    }

    pub fn zero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0).count()
    }

    pub fn one_count(&self) -> usize {
        self.values.len() - self.zero_count()
    }
}

/// Zeros every pixel within Chebyshev distance `radius_px` of a source's nearest pixel.
pub fn rfi_mask(scen: &RfiScenario, grid: &GridSpec, radius_px: usize) -> Result<Mask> {
    if radius_px < 1 {
        return Err(VfdmError::Config("mask radius must be >= 1".into()));
    }
    let n = grid.n as isize;
    let r = radius_px as isize;
    let mut mask = Mask::ones(*grid);
    for src in &scen.sources {
        let (ck, cl) = grid.nearest_pixel(src.xi0, src.eta0);
        let (ck, cl) = (ck as isize, cl as isize);
        for k in (ck - r).max(0)..=(ck + r).min(n - 1) {
            for l in (cl - r).max(0)..=(cl + r).min(n - 1) {
                mask.values[(k * n + l) as usize] = 0;
            }
        }
    }
    Ok(mask)
}
