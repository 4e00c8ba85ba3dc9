//! JSON container for a single visibility grid or brightness-temperature map.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use num_complex::Complex64;
use vfdm_core::{GridSpec, SceneImage, VisRole, VisibilityGrid};

use crate::config::write_atomic;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldFile {
    Visibility {
        grid: GridSpec,
        role: VisRole,
        re: Vec<f64>,
        im: Vec<f64>,
    },
    /// Real brightness temperature in Kelvin, row-major.
    Brightness { grid: GridSpec, values: Vec<f64> },
}

impl FieldFile {
    pub fn from_vis(v: &VisibilityGrid) -> Self {
        FieldFile::Visibility {
            grid: v.grid,
            role: v.role,
            re: v.values.iter().map(|c| c.re).collect(),
            im: v.values.iter().map(|c| c.im).collect(),
        }
    }

    pub fn from_image(img: &SceneImage) -> Self {
        FieldFile::Brightness {
            grid: img.grid,
            values: img.values.clone(),
        }
    }

    pub fn to_vis(&self) -> Result<Option<VisibilityGrid>> {
        match self {
            FieldFile::Visibility { grid, role, re, im } => {
                if re.len() != im.len() {
                    return Err(CliError::Config("visibility planes differ in length".into()));
                }
                let values = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
                Ok(Some(VisibilityGrid::from_values(*grid, values, *role)?))
            }
            FieldFile::Brightness { .. } => Ok(None),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_vec(self).expect("field serializes");
        write_atomic(path, &text)
    }
}
