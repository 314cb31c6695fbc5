//! File formats: data and matrix CSV, layout/truth/fit JSON, and the
//! metric, score-table and bench CSVs. Every JSON document and every CSV
//! written here carries a schema version.
//!
//! Floats are written in shortest round-trip form, so a value read back is
//! bit-identical to the one written.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::blockmat::BlockLayout;
use crate::error::{Result, SipcaError};
use crate::simulate::{SimulatedData, SimulationSetup};
use crate::solver::{extract_supports, Supports};

pub const SCHEMA_VERSION: u32 = 1;

/// Reads an `n x p` numeric CSV. A first row with any non-numeric field is
/// taken to be a header and skipped.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(SipcaError::format(path, format!("row {}: {e}", i + 1))),
        }
    }
    let Some(p) = rows.first().map(Vec::len) else {
        return Err(SipcaError::format(path, "no numeric rows"));
    };
    if let Some(bad) = rows.iter().position(|r| r.len() != p) {
        return Err(SipcaError::format(path, format!("row {} has {} fields, expected {p}", bad + 1, rows[bad].len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SipcaError::format(path, "non-finite value"));
    }
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

fn csv_error(path: &Path, e: csv::Error) -> SipcaError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SipcaError::io(path, io),
        other => SipcaError::format(path, format!("{other:?}")),
    }
}

/// Writes a matrix as headerless row-major CSV.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| SipcaError::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => fs::create_dir_all(dir).map_err(|e| SipcaError::io(dir, e)),
        None => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| SipcaError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SipcaError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| SipcaError::format(path, e))?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| SipcaError::format(path, e))
}

/// Reads a JSON or TOML document, chosen by extension.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| SipcaError::format(path, e)),
        _ => serde_json::from_str(&text).map_err(|e| SipcaError::format(path, e)),
    }
}

pub fn read_layout(path: &Path) -> Result<BlockLayout> {
    read_json(path)
}

pub fn write_layout(path: &Path, layout: &BlockLayout) -> Result<()> {
    write_json(path, layout)
}

/// Reads one noise variance per view: either a JSON array or one number
/// per line.
pub fn read_noise_variances(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| SipcaError::format(path, e));
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<f64>().map_err(|e| SipcaError::format(path, format!("{l:?}: {e}"))))
        .collect()
}

/// Ground truth of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub schema_version: u32,
    pub setup: SimulationSetup,
    pub layout: BlockLayout,
    pub eigenvalues: Vec<f64>,
    /// One entry per eigenvector, each of length `p`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub noise_variances: Vec<f64>,
    pub supports: Vec<Supports>,
}

impl Truth {
    pub fn from_simulation(setup: &SimulationSetup, sim: &SimulatedData) -> Result<Self> {
        let v = &sim.spec.eigenvectors;
        let supports = v
            .column_iter()
            .map(|c| extract_supports(&c.clone_owned(), &sim.spec.layout, 0.0))
            .collect::<Result<_>>()?;
        Ok(Truth {
            schema_version: SCHEMA_VERSION,
            setup: setup.clone(),
            layout: sim.spec.layout.clone(),
            eigenvalues: sim.spec.eigenvalues.clone(),
            eigenvectors: columns(v),
            noise_variances: sim.spec.noise_variances.clone(),
            supports,
        })
    }

    pub fn eigenvector_matrix(&self) -> Result<DMatrix<f64>> {
        vectors_to_matrix(&self.eigenvectors, self.layout.dim())
    }
}

pub fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Stacks equal-length vectors as the columns of a `p x r` matrix.
pub fn vectors_to_matrix(vs: &[Vec<f64>], p: usize) -> Result<DMatrix<f64>> {
    if let Some(bad) = vs.iter().find(|v| v.len() != p) {
        return Err(SipcaError::Dimension(format!("vector of length {}, expected {p}", bad.len())));
    }
    Ok(DMatrix::from_fn(p, vs.len(), |i, j| vs[j][i]))
}

/// Writes a CSV with a header row; floats should already be formatted.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| SipcaError::io(path, e))
}
