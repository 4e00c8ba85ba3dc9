//! Binary checkpoint: magic, version, JSON header, then named little-endian arrays.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::{NnError, Result};
use crate::real::{Precision, Real};
use crate::unet::{UNet, UNetConfig};

pub const CKPT_MAGIC: &[u8; 8] = b"VFDMCKPT";
pub const CKPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub unet: UNetConfig,
    pub dtype: Precision,
    pub step: u64,
    pub grid_n: usize,
    pub scale: f64,
    /// Diffusion schedule settings, stored opaquely.
    pub schedule: serde_json::Value,
    /// Training settings, stored opaquely.
    #[serde(default)]
    pub training: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct Checkpoint<F: Real> {
    pub meta: CheckpointMeta,
    pub net: UNet<F>,
    pub adam: Adam<F>,
}

fn dtype_code(p: Precision) -> u8 {
    match p {
        Precision::F32 => 0,
        Precision::F64 => 1,
    }
}

fn put_array<F: Real>(out: &mut Vec<u8>, name: &str, data: &[F]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(dtype_code(F::PRECISION));
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    out.extend_from_slice(&((data.len() * F::BYTES) as u64).to_le_bytes());
    for v in data {
        v.write_le(out);
    }
}

/// Serializes to bytes; `save` writes these atomically.
pub fn encode<F: Real>(meta: &CheckpointMeta, net: &UNet<F>, adam: &Adam<F>) -> Result<Vec<u8>> {
    if meta.unet != net.config || meta.dtype != F::PRECISION {
        return Err(NnError::Checkpoint("metadata does not describe the network".into()));
    }
    let header = serde_json::to_vec(meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    let names = net.param_names();
    out.extend_from_slice(&((names.len() * 3) as u32).to_le_bytes());
    for (name, p) in names.iter().zip(&net.params) {
        put_array(&mut out, name, p);
    }
    for (name, m) in names.iter().zip(&adam.m) {
        put_array(&mut out, &format!("adam.m.{name}"), m);
    }
    for (name, v) in names.iter().zip(&adam.v) {
        put_array(&mut out, &format!("adam.v.{name}"), v);
    }
    out.extend_from_slice(&adam.step.to_le_bytes());
    Ok(out)
}

pub fn save<F: Real>(path: &Path, meta: &CheckpointMeta, net: &UNet<F>, adam: &Adam<F>) -> Result<()> {
    let bytes = encode(meta, net, adam)?;
    let io = |e| NnError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(&bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(NnError::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn get_array<F: Real>(cur: &mut Cursor<'_>, want_name: &str, want_len: usize) -> Result<Vec<F>> {
    let name_len = cur.u32()? as usize;
    let name = std::str::from_utf8(cur.take(name_len)?)
        .map_err(|_| NnError::Checkpoint("array name is not UTF-8".into()))?;
    if name != want_name {
        return Err(NnError::Checkpoint(format!("expected array {want_name}, found {name}")));
    }
    if cur.u8()? != dtype_code(F::PRECISION) {
        return Err(NnError::Checkpoint(format!("array {name} has the wrong dtype")));
    }
    let ndim = cur.u32()? as usize;
    let mut count = 1usize;
    for _ in 0..ndim {
        count = count.saturating_mul(cur.u64()? as usize);
    }
    let bytes = cur.u64()? as usize;
    if count != want_len || bytes != count * F::BYTES {
        return Err(NnError::Checkpoint(format!(
            "array {name} has {count} elements, network expects {want_len}"
        )));
    }
    let raw = cur.take(bytes)?;
    Ok(raw.chunks_exact(F::BYTES).map(F::read_le).collect())
}

fn decode_header(cur: &mut Cursor<'_>) -> Result<CheckpointMeta> {
    if cur.take(8)? != CKPT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != CKPT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CKPT_VERSION})"
        )));
    }
    let hlen = cur.u64()? as usize;
    Ok(serde_json::from_slice(cur.take(hlen)?)?)
}

/// Reads only the JSON header, e.g. to pick the precision before a full load.
pub fn read_meta(path: &Path) -> Result<CheckpointMeta> {
    let bytes = fs::read(path).map_err(|e| NnError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    decode_header(&mut Cursor { buf: &bytes, pos: 0 })
}

pub fn decode<F: Real>(bytes: &[u8]) -> Result<Checkpoint<F>> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let meta = decode_header(&mut cur)?;
    if meta.dtype != F::PRECISION || meta.unet.precision != F::PRECISION {
        return Err(NnError::Checkpoint(format!(
            "checkpoint holds {:?} weights, {:?} requested",
            meta.dtype,
            F::PRECISION
        )));
    }
    let mut net = UNet::<F>::new(meta.unet.clone(), 0)?;
    let names = net.param_names().to_vec();
    let sizes: Vec<usize> = net.params.iter().map(Vec::len).collect();
    if cur.u32()? as usize != names.len() * 3 {
        return Err(NnError::Checkpoint("array count does not match the network".into()));
    }
    let mut params = Vec::with_capacity(names.len());
    for (name, &n) in names.iter().zip(&sizes) {
        params.push(get_array(&mut cur, name, n)?);
    }
    let mut adam = Adam::new(&params);
    for (i, (name, &n)) in names.iter().zip(&sizes).enumerate() {
        adam.m[i] = get_array(&mut cur, &format!("adam.m.{name}"), n)?;
    }
    for (i, (name, &n)) in names.iter().zip(&sizes).enumerate() {
        adam.v[i] = get_array(&mut cur, &format!("adam.v.{name}"), n)?;
    }
    adam.step = cur.u64()?;
    if cur.pos != bytes.len() {
        return Err(NnError::Checkpoint("trailing bytes after checkpoint".into()));
    }
    let finite = |a: &Vec<Vec<F>>| a.iter().flatten().all(|v| v.is_finite());
    if !finite(&params) || !finite(&adam.m) || !finite(&adam.v) {
        return Err(NnError::Numeric("checkpoint contains non-finite values".into()));
    }
    net.set_params(params)?;
    Ok(Checkpoint { meta, net, adam })
}

/// Loads a checkpoint and checks it was trained on a grid of side `grid_n`.
pub fn load<F: Real>(path: &Path, grid_n: Option<usize>) -> Result<Checkpoint<F>> {
    let bytes = fs::read(path).map_err(|e| NnError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let ck = decode::<F>(&bytes)?;
    if let Some(n) = grid_n {
        if ck.meta.grid_n != n {
            return Err(NnError::Checkpoint(format!(
                "checkpoint was trained on n = {}, data has n = {n}",
                ck.meta.grid_n
            )));
        }
    }
    Ok(ck)
}
