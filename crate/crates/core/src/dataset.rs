//! Paired clean/dirty visibility dataset: generation, sharded storage,
//! global normalization and train/test split.
//!
//! Shard layout (little-endian): `"VFDM"`, `u32` version, `u32` n, `u32`
//! pair count, then fixed-size records of `id: u64`, `mode: u8`,
//! `source_count: u8`, `scenario_seed: u64`, `f32` planes `clean_re`,
//! `clean_im`, `dirty_re`, `dirty_im` (each n*n, row-major), `u8` mask
//! (n*n) and a CRC32 of the record bytes that precede it.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VfdmError};
use crate::grid::GridSpec;
use crate::signal::{forward_visibility, modify_bt, AntennaPattern, VisRole, VisibilityGrid};
use crate::simulate::{
    derive_seed, inject, rfi_mask, rng_from, sample_rfi_scenario, synth_scene, Mask, RfiMode,
    RfiScenario, SceneKind, SimConfig,
};

pub const SHARD_MAGIC: &[u8; 4] = b"VFDM";
pub const SHARD_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CLIP_BOUND: f64 = 16.0;
pub const SCALE_PERCENTILE: f64 = 99.5;
const SHARD_HEADER_LEN: u64 = 16;

const STREAM_MODE: u64 = 1;
const STREAM_SCENE: u64 = 2;
const STREAM_SCENARIO: u64 = 3;
const STREAM_SPLIT: u64 = 0x5b117;

/// How the test-set size is derived from the pair count `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum SplitRule {
    /// `|test| = round(f * N)`.
    TestFraction(f64),
    /// `|test| = round(r / (1 + r) * N)`, i.e. test is `r` times the train count.
    TrainRatio(f64),
}

impl Default for SplitRule {
    fn default() -> Self {
        SplitRule::TestFraction(0.1007)
    }
}

impl SplitRule {
    pub fn validate(&self) -> Result<()> {
        let (SplitRule::TestFraction(f) | SplitRule::TrainRatio(f)) = *self;
        if !(f > 0.0 && f < 1.0) {
            return Err(VfdmError::Config(format!("split fraction must lie in (0, 1), got {f}")));
        }
        Ok(())
    }

    /// `(train, test)` sizes for `n` pairs.
    pub fn counts(&self, n: usize) -> (usize, usize) {
        let test = match *self {
            SplitRule::TestFraction(f) => (f * n as f64).round(),
            SplitRule::TrainRatio(r) => (r / (1.0 + r) * n as f64).round(),
        } as usize;
        let test = test.min(n);
        (n - test, test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub pattern: AntennaPattern,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Relative weights of weak, medium, strong, very strong and hybrid samples.
    #[serde(default = "default_mixture")]
    pub mixture: [f64; 5],
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shard_size")]
    pub shard_size: usize,
    #[serde(default)]
    pub split: SplitRule,
}

fn default_pairs() -> usize {
    2000
}
fn default_mixture() -> [f64; 5] {
    [1.0; 5]
}
fn default_shard_size() -> usize {
    500
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            grid: GridSpec::default(),
            sim: SimConfig::default(),
            pattern: AntennaPattern::default(),
            pairs: default_pairs(),
            mixture: default_mixture(),
            seed: 0,
            shard_size: default_shard_size(),
            split: SplitRule::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.sim.validate()?;
        self.pattern.validate()?;
        self.split.validate()?;
        if self.pairs == 0 {
            return Err(VfdmError::Config("dataset needs at least one pair".into()));
        }
        if self.shard_size == 0 {
            return Err(VfdmError::Config("shard size must be positive".into()));
        }
        if self.mixture.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || self.mixture.iter().sum::<f64>() <= 0.0 {
            return Err(VfdmError::Config(format!("bad mode mixture {:?}", self.mixture)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub id: u64,
    pub mode: RfiMode,
    pub source_count: u8,
    pub scenario_seed: u64,
    pub clean: VisibilityGrid,
    pub dirty: VisibilityGrid,
    pub mask: Mask,
}

/// Everything needed to rebuild one pair from the master seed.
#[derive(Debug, Clone)]
pub struct PairRecipe {
    pub scene_kind: SceneKind,
    pub scene_seed: u64,
    pub scenario: RfiScenario,
}

fn quantize(vis: &mut VisibilityGrid) {
    for c in &mut vis.values {
        *c = Complex64::new(c.re as f32 as f64, c.im as f32 as f64);
    }
}

fn draw_mode(weights: &[f64; 5], u: f64) -> RfiMode {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (w, mode) in weights.iter().zip(RfiMode::ALL) {
        acc += w / total;
        if u < acc {
            return mode;
        }
    }
    *RfiMode::ALL
        .iter()
        .zip(weights)
        .rev()
        .find(|(_, w)| **w > 0.0)
        .map(|(m, _)| m)
        .unwrap_or(&RfiMode::Hybrid)
}

pub fn pair_recipe(cfg: &DatasetConfig, id: u64) -> PairRecipe {
    let sample_seed = derive_seed(cfg.seed, id);
    let mut rng = rng_from(derive_seed(sample_seed, STREAM_MODE));
    let mode = draw_mode(&cfg.mixture, rng.random::<f64>());
    let scene_kind = SceneKind::ALL[rng.random_range(0..SceneKind::ALL.len())];
    let scenario_seed = derive_seed(sample_seed, STREAM_SCENARIO);
    PairRecipe {
        scene_kind,
        scene_seed: derive_seed(sample_seed, STREAM_SCENE),
        scenario: sample_rfi_scenario(mode, scenario_seed, &cfg.sim, &cfg.grid),
    }
}

/// Builds pair `id`. Stored values are rounded to `f32`, as on disk.
pub fn generate_pair(cfg: &DatasetConfig, id: u64) -> Result<SamplePair> {
    let recipe = pair_recipe(cfg, id);
    let scene = synth_scene(recipe.scene_kind, recipe.scene_seed, &cfg.grid)?;
    let mut clean = forward_visibility(&modify_bt(&scene, &cfg.pattern)?);
    let mut dirty = inject(&clean, &recipe.scenario)?;
    quantize(&mut clean);
    quantize(&mut dirty);
    let mask = rfi_mask(&recipe.scenario, &cfg.grid, cfg.sim.mask_radius)?;
    Ok(SamplePair {
        id,
        mode: recipe.scenario.mode,
        source_count: recipe.scenario.sources.len() as u8,
        scenario_seed: recipe.scenario.seed,
        clean,
        dirty,
        mask,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub file: String,
    pub first_id: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIds {
    pub train: Vec<u64>,
    pub test: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub grid: GridSpec,
    pub pattern: AntennaPattern,
    pub sim: SimConfig,
    pub pair_count: u64,
    pub mode_counts: BTreeMap<RfiMode, u64>,
    /// Global normalization scale.
    pub scale: f64,
    pub master_seed: u64,
    pub shards: Vec<ShardEntry>,
    pub split: Option<SplitIds>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(VfdmError::Config(format!("scale must be finite and positive, got {}", self.scale)));
        }
        let mut next = 0u64;
        for s in &self.shards {
            if s.first_id != next || s.count == 0 {
                return Err(VfdmError::Config(format!("shard {} breaks the id range at {next}", s.file)));
            }
            next += s.count;
        }
        if next != self.pair_count {
            return Err(VfdmError::Config(format!(
                "shards cover {next} ids, manifest claims {}",
                self.pair_count
            )));
        }
        if let Some(split) = &self.split {
            let mut all: Vec<u64> = split.train.iter().chain(&split.test).copied().collect();
            all.sort_unstable();
            if all.len() as u64 != self.pair_count || all.iter().enumerate().any(|(i, &id)| id != i as u64) {
                return Err(VfdmError::Config("train/test split is not a partition of the ids".into()));
            }
        }
        Ok(())
    }

    fn locate(&self, id: u64) -> Option<(&ShardEntry, u64)> {
        self.shards
            .iter()
            .find(|s| id >= s.first_id && id < s.first_id + s.count)
            .map(|s| (s, id - s.first_id))
    }
}

fn record_len(n: usize) -> usize {
    8 + 1 + 1 + 8 + 4 * 4 * n * n + n * n + 4
}

fn encode_pair(pair: &SamplePair, buf: &mut Vec<u8>) {
    let start = buf.len();
    buf.extend_from_slice(&pair.id.to_le_bytes());
    buf.push(pair.mode.code());
    buf.push(pair.source_count);
    buf.extend_from_slice(&pair.scenario_seed.to_le_bytes());
    for vis in [&pair.clean, &pair.dirty] {
        for c in &vis.values {
            buf.extend_from_slice(&(c.re as f32).to_le_bytes());
        }
        for c in &vis.values {
            buf.extend_from_slice(&(c.im as f32).to_le_bytes());
        }
    }
    buf.extend_from_slice(&pair.mask.values);
    let crc = crc32fast::hash(&buf[start..]);
    buf.extend_from_slice(&crc.to_le_bytes());
}

fn decode_pair(bytes: &[u8], grid: GridSpec, shard: &str) -> Result<SamplePair> {
    let n2 = grid.len();
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(VfdmError::Integrity {
            shard: shard.to_string(),
            reason: "pair checksum mismatch".into(),
        });
    }
    let u64_at = |o: usize| u64::from_le_bytes(body[o..o + 8].try_into().unwrap());
    let id = u64_at(0);
    let mode = RfiMode::from_code(body[8]).ok_or_else(|| VfdmError::Integrity {
        shard: shard.to_string(),
        reason: format!("unknown mode code {}", body[8]),
    })?;
    let source_count = body[9];
    let scenario_seed = u64_at(10);
    let plane = |idx: usize| -> Vec<f64> {
        let o = 18 + idx * 4 * n2;
        body[o..o + 4 * n2]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect()
    };
    let join = |re: Vec<f64>, im: Vec<f64>| -> Vec<Complex64> {
        re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect()
    };
    let clean = join(plane(0), plane(1));
    let dirty = join(plane(2), plane(3));
    let mask_off = 18 + 16 * n2;
    Ok(SamplePair {
        id,
        mode,
        source_count,
        scenario_seed,
        clean: VisibilityGrid {
            grid,
            values: clean,
            role: VisRole::Clean,
        },
        dirty: VisibilityGrid {
            grid,
            values: dirty,
            role: VisRole::Dirty,
        },
        mask: Mask {
            grid,
            values: body[mask_off..mask_off + n2].to_vec(),
        },
    })
}

/// Writes a shard of consecutive pairs.
pub fn write_shard(path: &Path, grid: &GridSpec, pairs: &[SamplePair]) -> Result<()> {
    let mut buf = Vec::with_capacity(SHARD_HEADER_LEN as usize + pairs.len() * record_len(grid.n));
    buf.extend_from_slice(SHARD_MAGIC);
    buf.extend_from_slice(&SHARD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.n as u32).to_le_bytes());
    buf.extend_from_slice(&(pairs.len() as u32).to_le_bytes());
    for p in pairs {
        encode_pair(p, &mut buf);
    }
    let mut f = BufWriter::new(File::create(path).map_err(|e| VfdmError::io(path, e))?);
    f.write_all(&buf).map_err(|e| VfdmError::io(path, e))?;
    f.flush().map_err(|e| VfdmError::io(path, e))?;
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| VfdmError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| VfdmError::io(path, e))
}

pub fn percentile(values: &mut [f64], pct: f64) -> f64 {
    assert!(!values.is_empty());
    let rank = ((pct / 100.0) * (values.len() - 1) as f64).round() as usize;
    let (_, v, _) = values.select_nth_unstable_by(rank, |a, b| a.total_cmp(b));
    *v
}

/// Generates `cfg.pairs` pairs into `dir`, computes the normalization scale,
/// assigns the split and commits `manifest.json` last.
pub fn generate_dataset(cfg: &DatasetConfig, dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| VfdmError::io(dir, e))?;
    let n = cfg.grid.n;
    let mut magnitudes = Vec::with_capacity(cfg.pairs * 2 * n * n);
    let mut mode_counts: BTreeMap<RfiMode, u64> = RfiMode::ALL.iter().map(|m| (*m, 0)).collect();
    let mut shards = Vec::new();
    let mut first = 0u64;
    while (first as usize) < cfg.pairs {
        let count = cfg.shard_size.min(cfg.pairs - first as usize) as u64;
        let pairs = (first..first + count)
            .map(|id| generate_pair(cfg, id))
            .collect::<Result<Vec<_>>>()?;
        for p in &pairs {
            *mode_counts.entry(p.mode).or_default() += 1;
            for c in &p.clean.values {
                magnitudes.push(c.re.abs());
                magnitudes.push(c.im.abs());
            }
        }
        let file = format!("shard_{:05}.bin", shards.len());
        write_shard(&dir.join(&file), &cfg.grid, &pairs)?;
        shards.push(ShardEntry {
            file,
            first_id: first,
            count,
        });
        first += count;
    }
    let scale = percentile(&mut magnitudes, SCALE_PERCENTILE);
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        grid: cfg.grid,
        pattern: cfg.pattern,
        sim: cfg.sim,
        pair_count: cfg.pairs as u64,
        mode_counts,
        scale,
        master_seed: cfg.seed,
        shards,
        split: None,
    };
    let manifest = split(&manifest, cfg.split)?;
    manifest.validate()?;
    write_manifest(&manifest, dir)?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &DatasetManifest, dir: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
}

/// Deterministic shuffle of all ids by the master seed, then the first
/// `|test|` shuffled ids form the test set. Both lists are returned sorted.
pub fn split(manifest: &DatasetManifest, rule: SplitRule) -> Result<DatasetManifest> {
    rule.validate()?;
    let n = manifest.pair_count as usize;
    let (_, n_test) = rule.counts(n);
    let mut ids: Vec<u64> = (0..n as u64).collect();
    ids.shuffle(&mut rng_from(derive_seed(manifest.master_seed, STREAM_SPLIT)));
    let mut test = ids[..n_test].to_vec();
    let mut train = ids[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    let mut out = manifest.clone();
    out.split = Some(SplitIds { train, test });
    Ok(out)
}

/// A generated dataset opened for reading.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| VfdmError::io(&path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(VfdmError::Config(format!(
                "manifest version {} unsupported (expected {MANIFEST_VERSION})",
                manifest.version
            )));
        }
        manifest.validate()?;
        Ok(Dataset {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn train_ids(&self) -> &[u64] {
        self.manifest.split.as_ref().map(|s| s.train.as_slice()).unwrap_or(&[])
    }

    pub fn test_ids(&self) -> &[u64] {
        self.manifest.split.as_ref().map(|s| s.test.as_slice()).unwrap_or(&[])
    }

    /// Reads the requested pairs in the requested order.
    pub fn read_pairs<'a>(&'a self, ids: &'a [u64]) -> impl Iterator<Item = Result<SamplePair>> + 'a {
        let mut reader = ShardReader::new(self);
        ids.iter().map(move |&id| reader.read(id))
    }

    pub fn read_all(&self, ids: &[u64]) -> Result<Vec<SamplePair>> {
        self.read_pairs(ids).collect()
    }
}

struct ShardReader<'a> {
    ds: &'a Dataset,
    open: Option<(String, File)>,
}

impl<'a> ShardReader<'a> {
    fn new(ds: &'a Dataset) -> Self {
        ShardReader { ds, open: None }
    }

    fn read(&mut self, id: u64) -> Result<SamplePair> {
        let grid = self.ds.manifest.grid;
        let (entry, offset) = self
            .ds
            .manifest
            .locate(id)
            .ok_or_else(|| VfdmError::Domain(format!("pair id {id} not in dataset")))?;
        let integrity = |reason: String| VfdmError::Integrity {
            shard: entry.file.clone(),
            reason,
        };
        if self.open.as_ref().map(|(f, _)| f != &entry.file).unwrap_or(true) {
            let path = self.ds.dir.join(&entry.file);
            let mut f = File::open(&path).map_err(|e| integrity(format!("cannot open: {e}")))?;
            let mut header = [0u8; SHARD_HEADER_LEN as usize];
            f.read_exact(&mut header).map_err(|e| integrity(format!("short header: {e}")))?;
            let word = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
            if &header[..4] != SHARD_MAGIC || word(4) != SHARD_VERSION {
                return Err(integrity("bad magic or version".into()));
            }
            if word(8) as usize != grid.n || word(12) as u64 != entry.count {
                return Err(integrity("header disagrees with manifest".into()));
            }
            self.open = Some((entry.file.clone(), f));
        }
        let (_, f) = self.open.as_mut().unwrap();
        let len = record_len(grid.n);
        let mut bytes = vec![0u8; len];
        f.seek(SeekFrom::Start(SHARD_HEADER_LEN + offset * len as u64))
            .and_then(|_| f.read_exact(&mut bytes))
            .map_err(|e| integrity(format!("truncated record for id {id}: {e}")))?;
        let pair = decode_pair(&bytes, grid, &entry.file)?;
        if pair.id != id {
            return Err(integrity(format!("record holds id {} where {id} was expected", pair.id)));
        }
        Ok(pair)
    }
}

/// Two-channel normalized field: real plane then imaginary plane, each n*n.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub data: Vec<f64>,
    pub clipped: usize,
}

pub fn normalize(vis: &VisibilityGrid, scale: f64) -> Result<Normalized> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(VfdmError::Config(format!("normalization scale must be positive, got {scale}")));
    }
    let n2 = vis.values.len();
    let mut data = vec![0.0; 2 * n2];
    let mut clipped = 0;
    let mut clip = |v: f64| {
        let x = v / scale;
        if x.abs() > CLIP_BOUND {
            clipped += 1;
            x.clamp(-CLIP_BOUND, CLIP_BOUND)
        } else {
            x
        }
    };
    for (p, c) in vis.values.iter().enumerate() {
        data[p] = clip(c.re);
        data[n2 + p] = clip(c.im);
    }
    Ok(Normalized { data, clipped })
}

pub fn denormalize(data: &[f64], scale: f64, grid: GridSpec, role: VisRole) -> Result<VisibilityGrid> {
    let n2 = grid.len();
    if data.len() != 2 * n2 {
        return Err(VfdmError::Config(format!(
            "normalized field holds {} values, grid needs {}",
            data.len(),
            2 * n2
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(VfdmError::Config(format!("normalization scale must be positive, got {scale}")));
    }
    let values = (0..n2)
        .map(|p| Complex64::new(data[p] * scale, data[n2 + p] * scale))
        .collect();
    VisibilityGrid::from_values(grid, values, role)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_split_counts() {
        assert_eq!(SplitRule::TestFraction(0.1007).counts(13_007), (11_697, 1_310));
        assert_eq!(SplitRule::TrainRatio(0.1).counts(111), (101, 10));
        assert!(SplitRule::TestFraction(0.0).validate().is_err());
        assert!(SplitRule::TrainRatio(1.0).validate().is_err());
    }

    #[test]
    fn normalize_round_trip_and_clip() {
        let g = GridSpec::default();
        let z = VisibilityGrid::zeros(g, VisRole::Clean);
        let nz = normalize(&z, 2.0).unwrap();
        assert!(nz.data.iter().all(|&v| v == 0.0) && nz.clipped == 0);

        let mut v = VisibilityGrid::zeros(g, VisRole::Clean);
        for (p, c) in v.values.iter_mut().enumerate() {
            *c = Complex64::new((p as f64 * 0.37).sin() * 5.0, (p as f64 * 0.11).cos() * 4.0);
        }
        let nv = normalize(&v, 2.0).unwrap();
        assert_eq!(nv.clipped, 0);
        let back = denormalize(&nv.data, 2.0, g, VisRole::Clean).unwrap();
        for (a, b) in back.values.iter().zip(&v.values) {
            assert!((a - b).norm() < 1e-12);
        }

        let mut big = VisibilityGrid::zeros(g, VisRole::Clean);
        big.values[5] = Complex64::new(20.0 * 2.0, 0.0);
        big.values[6] = Complex64::new(0.0, -20.0 * 2.0);
        let nb = normalize(&big, 2.0).unwrap();
        assert_eq!(nb.clipped, 2);
        assert_eq!(nb.data[5], CLIP_BOUND);
        assert_eq!(nb.data[g.len() + 6], -CLIP_BOUND);

        assert!(normalize(&z, 0.0).is_err());
        assert!(normalize(&z, -1.0).is_err());
    }

    #[test]
    fn zero_pairs_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = DatasetConfig {
            pairs: 0,
            ..Default::default()
        };
        assert!(matches!(generate_dataset(&cfg, dir.path()), Err(VfdmError::Config(_))));
        assert!(!dir.path().join(MANIFEST_FILE).exists());
    }

    #[test]
    fn mixture_draw_respects_zero_weights() {
        let w = [0.0, 1.0, 0.0, 0.0, 0.0];
        for u in [0.0, 0.3, 0.999_999, 1.0] {
            assert_eq!(draw_mode(&w, u), RfiMode::Medium);
        }
    }
}
