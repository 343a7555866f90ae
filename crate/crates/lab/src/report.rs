//! `report`: collect the summaries in a directory and list every check.

use std::fs;
use std::path::Path;

use crate::error::{LabError, Result};
use crate::output::Summary;

#[derive(Debug, Clone)]
pub struct Report {
    pub lines: Vec<String>,
    pub total: usize,
    pub failed: usize,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

/// Read every `<command>.json` summary under `dir` (manifests skipped).
pub fn load_summaries(dir: &Path) -> Result<Vec<Summary>> {
    let entries = fs::read_dir(dir).map_err(|e| LabError::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && !name.ends_with(".manifest.json")
        })
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| LabError::io(&p, e))?;
        // sidecars of field files and foreign JSON are not summaries
        if let Ok(s) = serde_json::from_str::<Summary>(&text) {
            out.push(s);
        }
    }
    Ok(out)
}

pub fn report(dir: &Path) -> Result<Report> {
    let summaries = load_summaries(dir)?;
    if summaries.is_empty() {
        return Err(LabError::Config(format!("{}: no result summaries found", dir.display())));
    }
    let mut lines = Vec::new();
    let (mut total, mut failed) = (0, 0);
    for s in &summaries {
        for c in &s.checks {
            total += 1;
            if !c.pass {
                failed += 1;
            }
            let value = c.value.map_or_else(|| "-".to_string(), |v| v.to_string());
            lines.push(format!("{} {}/{} value={} ({})", if c.pass { "PASS" } else { "FAIL" }, s.command, c.name, value, c.detail));
        }
        if !s.failures.is_empty() {
            lines.push(format!("NOTE {}: {} failed samples excluded", s.command, s.failures.len()));
        }
    }
    lines.push(format!("{} of {} checks passed", total - failed, total));
    Ok(Report { lines, total, failed })
}
