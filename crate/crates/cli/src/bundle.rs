//! The fitted model as a self-contained JSON document.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spacedeform::nalgebra::{DMatrix, DVector};
use spacedeform::{BasicStructure, HyperParams, Location, MixtureVariogram, ThinPlateSpline};

use crate::error::{CliError, CliResult, Context};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub software: String,
    pub version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` pins it for reproducible runs.
    pub created_unix: u64,
    pub data_path: String,
    pub data_sha256: String,
    pub data_rows: usize,
}

impl Provenance {
    pub fn new(data_path: &Path, data_bytes: &[u8], data_rows: usize) -> Self {
        Self {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: timestamp(),
            data_path: data_path.display().to_string(),
            data_sha256: sha256_hex(data_bytes),
            data_rows,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn timestamp() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return epoch;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Thin-plate spline coefficients, matrices stored row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineParts {
    pub offset: Vec<f64>,
    pub affine: Vec<Vec<f64>>,
    pub radial: Vec<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
    pub ridge: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], ncols: usize, what: &str) -> CliResult<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::data(format!("bundle {what}: every row needs {ncols} entries")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

impl SplineParts {
    pub fn from_spline(s: &ThinPlateSpline) -> Self {
        Self {
            offset: s.offset().iter().copied().collect(),
            affine: rows(s.affine()),
            radial: rows(s.radial()),
            centers: s.centers().iter().map(|c| c.coords().to_vec()).collect(),
            ridge: s.ridge(),
        }
    }

    pub fn to_spline(&self) -> CliResult<ThinPlateSpline> {
        let q = self.offset.len();
        let centers = self
            .centers
            .iter()
            .map(|c| Location::new(c))
            .collect::<Result<Vec<_>, _>>()
            .context("bundle spline centers")?;
        let spline = ThinPlateSpline::from_parts(
            DVector::from_column_slice(&self.offset),
            matrix(&self.affine, q, "spline affine part")?,
            matrix(&self.radial, q, "spline radial part")?,
            centers,
        )
        .context("bundle spline")?;
        Ok(spline)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitBundle {
    pub format: u32,
    pub provenance: Provenance,
    pub dim: usize,
    /// Data bounding box, one `[min, max]` per axis.
    pub bounds: Vec<[f64; 2]>,
    pub stationary: bool,
    pub hyper: Option<HyperParams>,
    /// Known mean used by simple kriging and simulation (the data mean).
    pub mean: f64,
    pub anchors: Option<Vec<Vec<f64>>>,
    pub stress: Option<f64>,
    pub spline: SplineParts,
    pub variogram: Vec<BasicStructure>,
}

impl FitBundle {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).context(format!("reading bundle {}", path.display()))?;
        let bundle: FitBundle = serde_json::from_str(&text).context(format!("parsing bundle {}", path.display()))?;
        bundle.validate().context(format!("bundle {}", path.display()))?;
        Ok(bundle)
    }

    pub fn spline(&self) -> CliResult<ThinPlateSpline> {
        self.spline.to_spline()
    }

    pub fn model(&self) -> CliResult<MixtureVariogram> {
        let checked = self
            .variogram
            .iter()
            .map(|c| BasicStructure::new(c.kind, c.sill, c.range))
            .collect::<Result<Vec<_>, _>>()
            .context("bundle variogram")?;
        Ok(MixtureVariogram::new(checked).context("bundle variogram")?)
    }

    fn validate(&self) -> CliResult<()> {
        if self.format != FORMAT_VERSION {
            return Err(CliError::data(format!(
                "format {} is not supported (expected {FORMAT_VERSION})",
                self.format
            )));
        }
        let spline = self.spline()?;
        if spline.input_dim() != self.dim || self.bounds.len() != self.dim {
            return Err(CliError::data(format!(
                "spline dimension {} and bounds do not match data dimension {}",
                spline.input_dim(),
                self.dim
            )));
        }
        self.model()?;
        Ok(())
    }
}
