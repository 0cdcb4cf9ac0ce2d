//! Config loading and output files.
//!
//! Config files are flat TOML key–value tables. Every output file carries
//! the format version and the full parameter set: CSV files as leading
//! `# key = value` comment lines, JSON files as top-level fields.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const FORMAT_VERSION: u32 = 1;

/// Every key accepted in a config file. Unknown keys are rejected by name.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub omega0: Option<f64>,
    pub g: Option<f64>,
    pub h: Option<f64>,
    pub omega_c: Option<f64>,
    #[serde(rename = "A")]
    pub amplitude: Option<f64>,
    #[serde(rename = "omega_T")]
    pub omega_t: Option<f64>,
    #[serde(rename = "N")]
    pub n_atoms: Option<u32>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub driven: Option<bool>,
    pub lattice_size: Option<usize>,
    pub n_max: Option<usize>,
    pub axis: Option<String>,
    pub scan_from: Option<f64>,
    pub scan_to: Option<f64>,
    pub scan_step: Option<f64>,
    pub n_from: Option<u32>,
    pub n_to: Option<u32>,
    pub a: Option<f64>,
    pub tol: Option<f64>,
    pub branch: Option<String>,
    pub t_r: Option<f64>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Parameters from the file on top of the defaults.
    pub fn params(&self) -> ModelParams {
        let d = ModelParams::default();
        ModelParams {
            omega0: self.omega0.unwrap_or(d.omega0),
            g: self.g.unwrap_or(d.g),
            h: self.h.unwrap_or(d.h),
            omega_c: self.omega_c.unwrap_or(d.omega_c),
            amplitude: self.amplitude.unwrap_or(d.amplitude),
            omega_t: self.omega_t.unwrap_or(d.omega_t),
            n_atoms: self.n_atoms.unwrap_or(d.n_atoms),
        }
    }
}

/// Create `dir` and any missing parents.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

/// Write a CSV file with the provenance header.
pub fn write_csv(
    path: &Path,
    params: &ModelParams,
    extra: &[(&str, String)],
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# format_version = {FORMAT_VERSION}")?;
    for (k, v) in params.key_values() {
        writeln!(out, "# {k} = {v}")?;
    }
    for (k, v) in extra {
        writeln!(out, "# {k} = {v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format_version: u32,
    params: &'a ModelParams,
    #[serde(flatten)]
    body: &'a T,
}

/// Write a JSON object with the provenance fields.
pub fn write_json<T: Serialize>(path: &Path, params: &ModelParams, body: &T) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(out, &Envelope { format_version: FORMAT_VERSION, params, body })?;
    Ok(())
}

/// Shortest round-trip representation of a float.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Float or an empty field.
pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
