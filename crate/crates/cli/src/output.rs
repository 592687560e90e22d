//! Deterministic artifact emission: CSV traces, JSON report, config echo,
//! and a manifest of content hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const REPORT_SCHEMA: &str = "quanneal.report.v1";

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl CheckResult {
    /// Pass when value <= threshold.
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }

    /// Pass when value >= threshold.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

/// Versioned run summary; the exit gate for the verify subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub manifest: Vec<ManifestEntry>,
    /// Canonicalized configuration (also emitted as config.toml).
    pub config_echo: String,
}

impl RunReport {
    pub fn failed_checks(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

/// Collects output files in a run directory and hashes them into the
/// manifest.
pub struct Emitter {
    dir: PathBuf,
    precision: usize,
    manifest: Vec<ManifestEntry>,
}

impl Emitter {
    pub fn new(dir: &Path, precision: usize) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            precision,
            manifest: Vec::new(),
        })
    }

    /// Scientific notation with the configured number of significant digits;
    /// 17 digits round-trip f64 losslessly.
    pub fn fmt(&self, x: f64) -> String {
        format!("{:.*e}", self.precision.saturating_sub(1), x)
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        self.manifest.push(ManifestEntry {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(content.as_bytes())),
        });
        Ok(())
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut out = String::new();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.write_text(name, &out)
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    /// Write report.json (the report itself is not part of the manifest).
    pub fn finish(mut self, mut report: RunReport) -> Result<RunReport, CliError> {
        report.manifest = std::mem::take(&mut self.manifest);
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
        let path = self.dir.join("report.json");
        fs::write(&path, json).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(report)
    }
}

/// Output precision resolution: env override beats the config value.
pub fn resolve_precision(config_precision: usize) -> usize {
    match std::env::var("QUANNEAL_PRECISION") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|p| (1..=17).contains(p))
            .unwrap_or(config_precision),
        Err(_) => config_precision,
    }
}
