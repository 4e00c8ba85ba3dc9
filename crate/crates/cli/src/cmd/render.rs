use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use vfdm_core::metrics::reconstruct;
use vfdm_core::AntennaPattern;

use crate::config::write_atomic;
use crate::error::{CliError, Result};
use crate::fields::FieldFile;

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub side: usize,
    pub gray: Vec<u8>,
    pub lo: f64,
    pub hi: f64,
}

/// Linear map of `[lo, hi]` onto `0..=255`; values outside are clamped.
/// A degenerate range renders every pixel black.
pub fn gray_level(v: f64, lo: f64, hi: f64) -> u8 {
    if hi <= lo {
        return 0;
    }
    (255.0 * ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).round() as u8
}

pub fn to_gray(values: &[f64], side: usize, range: Option<(f64, f64)>) -> Result<Rendered> {
    if values.len() != side * side {
        return Err(CliError::Config(format!("{} values do not form a {side}x{side} map", values.len())));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(CliError::Config(format!("bad render range [{lo}, {hi}]")));
            }
            (lo, hi)
        }
        None => values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
    };
    Ok(Rendered {
        side,
        gray: values.iter().map(|&v| gray_level(v, lo, hi)).collect(),
        lo,
        hi,
    })
}

fn write_pgm(path: &Path, r: &Rendered) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", r.side, r.side).into_bytes();
    bytes.extend_from_slice(&r.gray);
    write_atomic(path, &bytes)
}

fn write_png(path: &Path, r: &Rendered) -> Result<()> {
    let tmp = path.with_extension("png.tmp");
    let file = File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), r.side as u32, r.side as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| CliError::io(&tmp, std::io::Error::other(e.to_string()));
    let mut w = enc.write_header().map_err(png_err)?;
    w.write_image_data(&r.gray).map_err(png_err)?;
    w.finish().map_err(png_err)?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".range.txt");
    PathBuf::from(s)
}

/// Renders a brightness map, or a visibility grid after reconstruction with
/// `pattern`, to PGM or PNG by extension. The display limits go to a
/// `<out>.range.txt` sidecar.
pub fn run(input: &Path, out: &Path, range: Option<(f64, f64)>, pattern: &AntennaPattern) -> Result<Rendered> {
    let field = FieldFile::read(input)?;
    let (side, values) = match &field {
        FieldFile::Brightness { grid, values } => (grid.n, values.clone()),
        FieldFile::Visibility { grid, .. } => {
            let vis = field.to_vis()?.expect("visibility variant");
            (grid.n, reconstruct(&vis, pattern)?.values)
        }
    };
    let r = to_gray(&values, side, range)?;
    match out.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") => write_pgm(out, &r)?,
        Some("png") => write_png(out, &r)?,
        _ => {
            return Err(CliError::Config(format!(
                "output {} must end in .pgm or .png",
                out.display()
            )))
        }
    }
    write_atomic(&sidecar_path(out), format!("min {}\nmax {}\n", r.lo, r.hi).as_bytes())?;
    Ok(r)
}
