//! Run results, CSV/JSON emission and the hashed manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Shortest round-trip representation, so CSVs are exact and reproducible.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when value <= threshold.
    pub fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// Passes when value >= threshold.
    pub fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed: value >= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// Passes when lo <= value <= hi; records hi as the threshold.
    pub fn within(name: &str, value: f64, lo: f64, hi: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed: value >= lo && value <= hi,
            value,
            threshold: hi,
            detail: detail.into(),
        }
    }

    pub fn boolean(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: detail.into(),
        }
    }
}

/// In-memory result of one experiment.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub derived: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    pub documents: Vec<(String, serde_json::Value)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<4} {:<28} value={:<12.4e} threshold={:<10.3e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold,
                c.detail
            );
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config: serde_json::Value,
    pub toolkit_version: String,
    pub wall_time_s: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub derived: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<FileEntry> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| HarnessError::Io(path.clone(), e))?;
    let digest = Sha256::digest(contents.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(FileEntry {
        path: name.to_string(),
        sha256: hex,
        bytes: contents.len(),
    })
}

/// Writes the resolved config, every table and document, and manifest.json.
pub fn write_outputs(
    config: &ExperimentConfig,
    outcome: &Outcome,
    wall_time_s: f64,
    dir: &Path,
) -> Result<RunManifest> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
    let mut files = vec![write_file(dir, "config.json", &config.to_json())?];
    for t in &outcome.tables {
        files.push(write_file(dir, &format!("{}.csv", t.name), &t.to_csv())?);
    }
    for (name, doc) in &outcome.documents {
        let text = serde_json::to_string_pretty(doc).expect("document serializes");
        files.push(write_file(dir, &format!("{name}.json"), &text)?);
    }
    let manifest = RunManifest {
        experiment: config.experiment.name().to_string(),
        config: serde_json::to_value(config).expect("config serializes"),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s,
        passed: outcome.passed(),
        checks: outcome.checks.clone(),
        derived: outcome.derived.clone(),
        files,
    };
    let path: PathBuf = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| HarnessError::Io(path, e))?;
    Ok(manifest)
}
