//! Worker pool over sample indices with per-sample checkpoints.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: usize,
    /// Directory holding one JSON file per finished sample.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct EnsembleRun<T> {
    /// Successful samples in index order.
    pub records: Vec<(u64, T)>,
    pub failures: Vec<(u64, String)>,
    pub resumed: usize,
    pub computed: usize,
}

impl<T> EnsembleRun<T> {
    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.records.iter().map(|(_, t)| t)
    }
}

fn checkpoint_path(dir: &Path, idx: u64) -> PathBuf {
    dir.join(format!("{idx}.json"))
}

fn load<T: DeserializeOwned>(dir: &Path, idx: u64) -> Option<T> {
    let text = fs::read_to_string(checkpoint_path(dir, idx)).ok()?;
    serde_json::from_str(&text).ok()
}

fn store<T: Serialize>(dir: &Path, idx: u64, value: &T) -> Result<()> {
    let path = checkpoint_path(dir, idx);
    let tmp = dir.join(format!(".{idx}.json.tmp"));
    let text = serde_json::to_string(value)?;
    fs::write(&tmp, text).map_err(|e| LabError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| LabError::io(&path, e))
}

enum Outcome<T> {
    Resumed(T),
    Computed(T),
    Failed(String),
}

/// Evaluate `f` on samples `0..n`. Failed samples are excluded and counted;
/// more than 1% failures fails the whole run. Output order never depends on
/// the worker count.
pub fn run_ensemble<T, F>(n: usize, opts: &RunOptions, f: F) -> Result<EnsembleRun<T>>
where
    T: Serialize + DeserializeOwned + Send,
    F: Fn(u64) -> homog_core::Result<T> + Sync,
{
    if let Some(dir) = &opts.checkpoint {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| LabError::Pool(e.to_string()))?;
    let job = |idx: u64| -> Result<Outcome<T>> {
        if let Some(dir) = &opts.checkpoint {
            if let Some(t) = load(dir, idx) {
                return Ok(Outcome::Resumed(t));
            }
        }
        match f(idx) {
            Ok(t) => {
                if let Some(dir) = &opts.checkpoint {
                    store(dir, idx, &t)?;
                }
                Ok(Outcome::Computed(t))
            }
            Err(e) => Ok(Outcome::Failed(e.to_string())),
        }
    };
    let outcomes: Vec<Result<Outcome<T>>> = pool.install(|| (0..n as u64).into_par_iter().map(job).collect());
    let mut run = EnsembleRun { records: Vec::with_capacity(n), failures: Vec::new(), resumed: 0, computed: 0 };
    for (idx, o) in outcomes.into_iter().enumerate() {
        let idx = idx as u64;
        match o? {
            Outcome::Resumed(t) => {
                run.resumed += 1;
                run.records.push((idx, t));
            }
            Outcome::Computed(t) => {
                run.computed += 1;
                run.records.push((idx, t));
            }
            Outcome::Failed(reason) => run.failures.push((idx, reason)),
        }
    }
    if run.failures.len() * 100 > n {
        let (first, reason) = run.failures[0].clone();
        return Err(LabError::FailureRate { failed: run.failures.len(), total: n, first, reason });
    }
    Ok(run)
}
