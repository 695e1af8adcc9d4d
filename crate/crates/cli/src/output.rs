//! CSV rows and the JSON sidecar. Column order is part of the schema in
//! `docs/csv-schema.md`; keep both in sync.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryRow {
    pub cell: usize,
    pub trial: usize,
    pub n: u32,
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub noise: &'static str,
    pub sigma: Option<f64>,
    pub shots: Option<u64>,
    pub sigma_eff: Option<f64>,
    pub solver: &'static str,
    pub regularizer: Option<f64>,
    pub seed_state: u64,
    pub seed_operator: Option<u64>,
    pub seed_noise: u64,
    pub operator_fingerprint: Option<String>,
    pub status: &'static str,
    pub message: String,
    pub nuclear_error: Option<f64>,
    pub frobenius_error: Option<f64>,
    pub operator_error: Option<f64>,
    pub tail_nuclear: Option<f64>,
    pub bound_noiseless: Option<f64>,
    pub bound_gaussian: Option<f64>,
    pub bound_tail: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub final_objective: Option<f64>,
    pub residual_operator_norm: Option<f64>,
    pub success: bool,
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RipRow {
    pub cell: usize,
    pub trial: usize,
    pub n: u32,
    pub d: usize,
    pub m: usize,
    pub r: usize,
    pub seed_operator: Option<u64>,
    pub operator_fingerprint: String,
    pub method: &'static str,
    pub samples: usize,
    pub epsilon_hat: Option<f64>,
    pub implied_delta: Option<f64>,
    pub status: &'static str,
    pub message: String,
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NnqRow {
    pub sample: usize,
    pub seed: Option<u64>,
    pub y_norm: f64,
    pub radius: f64,
    pub nuclear_norm: f64,
    pub residual: f64,
    pub within_radius: bool,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateRow {
    pub cell: usize,
    pub trial: usize,
    pub seed_state: u64,
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorRow {
    pub cell: usize,
    pub trial: Option<usize>,
    pub seed_operator: Option<u64>,
    pub operator_fingerprint: String,
    pub position: usize,
    pub label_index: u64,
    pub label: String,
}

/// One operator as recorded in the sidecar: `{n, m, seed}` or, for a
/// seedless basis, the fingerprint alone.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OperatorRecord {
    pub cell: usize,
    /// `None` when one operator serves every trial of the cell.
    pub trial: Option<usize>,
    pub n: u32,
    pub m: usize,
    pub seed: Option<u64>,
    pub fingerprint: String,
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a, S: Serialize> {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub config: &'a Config,
    pub operators: Vec<OperatorRecord>,
    pub summary: S,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    let mut f = File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.write_all(b"\n").map_err(io)
}
