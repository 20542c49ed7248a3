//! Files written by scenario runs: diagnostics CSV, summary JSON and raw snapshots.
//!
//! Snapshot layout: little-endian `f64`, row-major (`x` fastest), the surface
//! unknown first followed by each velocity component. A JSON sidecar with the
//! same stem describes grid, time and components.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelState};
use crate::timeloop::Termination;

/// A pass/fail check with the measured value and the threshold it was held to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, value: Option<f64>, threshold: Option<f64>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// `value <= threshold`
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value <= threshold, Some(value), Some(threshold), format!("{value:.3e} <= {threshold:.3e}"))
    }

    /// `value >= threshold`
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value >= threshold, Some(value), Some(threshold), format!("{value:.4} >= {threshold:.4}"))
    }

    pub fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(name, false, None, None, detail)
    }
}

/// Outcome of one time integration inside a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub model: Option<ModelKind>,
    pub eps: f64,
    pub mu: f64,
    pub delta: f64,
    pub termination: Option<Termination>,
    pub steps: usize,
    pub final_time: Option<f64>,
    pub blowup_time: Option<f64>,
    /// Setup error or abnormal-termination message.
    pub message: Option<String>,
    /// Scenario-specific scalar results.
    pub metrics: BTreeMap<String, f64>,
}

/// A small table emitted in the summary, e.g. the dispersion table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub runs: BTreeMap<String, f64>,
}

/// Per-scenario summary; everything except `timing` is deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub runs: Vec<RunSummary>,
    pub tables: BTreeMap<String, Table>,
    pub orders: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
    pub timing: Timing,
}

impl Summary {
    /// JSON with the `timing` object removed.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("summary serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Diagnostics CSV: header line then one row per record.
pub fn write_csv(path: &Path, modes: &[f64], records: &[DiagnosticsRecord]) -> Result<()> {
    let mut text = DiagnosticsRecord::csv_header(modes);
    text.push('\n');
    for r in records {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let mut text = summary.to_json();
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub dim: usize,
    pub n: usize,
    pub lengths: Vec<f64>,
    pub gamma: f64,
    pub time: f64,
    pub model: ModelKind,
    pub components: Vec<String>,
    pub dtype: String,
    pub byte_len: usize,
}

fn component_names(kind: ModelKind, dim: usize) -> Vec<String> {
    let mut names = vec![match kind {
        ModelKind::ModifiedBp => "q",
        ModelKind::Burgers => "u",
        _ => "zeta",
    }
    .to_string()];
    if kind.has_velocity() {
        names.extend(["vx", "vy"].iter().take(dim).map(|s| s.to_string()));
    }
    names
}

/// Writes `<stem>.bin` and `<stem>.json`; returns the binary path.
pub fn write_snapshot(dir: &Path, stem: &str, kind: ModelKind, state: &ModelState) -> Result<PathBuf> {
    let grid = state.grid();
    let flat = state.to_flat();
    let mut bytes = Vec::with_capacity(8 * flat.len());
    for x in &flat {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    let meta = SnapshotMeta {
        dim: grid.dim(),
        n: grid.n(),
        lengths: grid.lengths().to_vec(),
        gamma: grid.gamma(),
        time: state.time,
        model: kind,
        components: component_names(kind, grid.dim()),
        dtype: "f64-le".into(),
        byte_len: bytes.len(),
    };
    let bin = dir.join(format!("{stem}.bin"));
    write_file(&bin, &bytes)?;
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write_file(&dir.join(format!("{stem}.json")), json.as_bytes())?;
    Ok(bin)
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(bin: &Path) -> Result<(SnapshotMeta, Vec<f64>)> {
    let sidecar = bin.with_extension("json");
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let meta: SnapshotMeta =
        serde_json::from_str(&text).map_err(|e| Error::config(sidecar.display().to_string(), e.to_string()))?;
    let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
    if bytes.len() != meta.byte_len || bytes.len() % 8 != 0 {
        return Err(Error::Corrupted("snapshot length does not match its sidecar"));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((meta, values))
}
