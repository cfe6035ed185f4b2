use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lepspec::{EPDiagnostics, FitResult};
use serde::Serialize;

use crate::error::{CliError, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `j` or `p` as it appears in file names.
pub fn tag(x: f64) -> String {
    format!("{x}")
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvFile {
    pub fn create(path: PathBuf, header: &[&str]) -> Result<Self> {
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = Self { writer: csv::Writer::from_writer(file), path };
        out.row(header)?;
        Ok(out)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| self.csv_error(e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }

    fn csv_error(&self, e: csv::Error) -> CliError {
        let kind = match e.into_kind() {
            csv::ErrorKind::Io(io) => io,
            other => std::io::Error::other(format!("{other:?}")),
        };
        CliError::io(&self.path, kind)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Flat view of one fit for the JSON sidecars and sweep rows.
#[derive(Debug, Clone, Serialize)]
pub struct FitBlock {
    pub model: &'static str,
    pub a: f64,
    pub omega0: f64,
    pub gamma: f64,
    pub c: f64,
    /// Absent for Model A.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub rss: f64,
    pub n_points: usize,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    pub window: [f64; 2],
}

impl From<&FitResult<f64>> for FitBlock {
    fn from(f: &FitResult<f64>) -> Self {
        let p = f.params.as_b();
        let is_b = f.model == lepspec::LineModel::B;
        Self {
            model: if is_b { "B" } else { "A" },
            a: p.a,
            omega0: p.omega0,
            gamma: p.gamma,
            c: p.c,
            b: is_b.then_some(p.b),
            rss: f.rss,
            n_points: f.n_points,
            n_params: f.n_params,
            converged: f.converged,
            iterations: f.n_iterations,
            window: [f.window.0, f.window.1],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsBlock {
    pub r: f64,
    pub delta_bic: f64,
    pub delta_aic: f64,
    pub window: [f64; 2],
    pub gamma_hat: f64,
}

impl From<&EPDiagnostics<f64>> for DiagnosticsBlock {
    fn from(d: &EPDiagnostics<f64>) -> Self {
        Self {
            r: d.r,
            delta_bic: d.delta_bic,
            delta_aic: d.delta_aic,
            window: [d.window.0, d.window.1],
            gamma_hat: d.gamma_hat,
        }
    }
}
