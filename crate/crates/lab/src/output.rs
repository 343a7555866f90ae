//! Result emission: one CSV table, one JSON summary and one manifest per
//! command.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{LabError, Result};

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| LabError::Format(e.to_string()))
    }
}

/// Shortest round-trip text of a float.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, value: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, value: value.is_finite().then_some(value), detail: detail.into() }
    }

    /// `value <= limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check::new(name, value <= limit, value, format!("<= {limit}"))
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Check::new(name, value >= lo && value <= hi, value, format!("in [{lo}, {hi}]"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub checks: Vec<Check>,
    pub values: serde_json::Map<String, serde_json::Value>,
    pub resumed: usize,
    pub computed: usize,
    pub failures: Vec<(u64, String)>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// Full configuration text; parsing it reproduces the run.
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Per-sample streams are derived from `seed` and the sample index.
    pub sample_indices: String,
    pub sign_convention: Option<f64>,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.canonical().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig, sign_convention: Option<f64>) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.serialize(),
            config_sha256: config_hash(cfg),
            seed: cfg.seed,
            sample_indices: format!("0..{}", cfg.samples),
            sign_convention,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Paths of the three outputs of `command` under `dir`.
pub fn output_paths(dir: &Path, command: &str) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join(format!("{command}.csv")), dir.join(format!("{command}.json")), dir.join(format!("{command}.manifest.json")))
}

pub fn write_outputs(dir: &Path, table: &Table, summary: &Summary, manifest: &Manifest) -> Result<()> {
    let (csv, json, man) = output_paths(dir, &summary.command);
    write_file(&csv, &table.to_bytes()?)?;
    write_json(&json, summary)?;
    write_json(&man, manifest)
}
