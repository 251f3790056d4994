//! Run manifests and report emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::run::ScenarioResult;
use crate::error::{Error, Result};

/// Provenance of one invocation, written next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub versions: std::collections::BTreeMap<String, String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<PathBuf>,
    /// "pass", "fail" or "error".
    pub status: String,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        let mut versions = std::collections::BTreeMap::new();
        versions.insert("gfl-core".to_string(), env!("CARGO_PKG_VERSION").to_string());
        RunManifest {
            command: command.into(),
            config_hash: None,
            seeds: Vec::new(),
            versions,
            started_unix: unix_now(),
            finished_unix: 0.0,
            outputs: Vec::new(),
            status: "error".into(),
        }
    }

    /// Writes `manifest.json` into `dir` through a temporary file and a rename.
    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = unix_now();
        let path = dir.join("manifest.json");
        write_atomic(&path, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok(path)
    }
}

/// Writes through `<path>.tmp` and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Md),
            other => Err(Error::config("format", format!("unknown report format {other:?} (csv, json, md)"))),
        }
    }
}

pub const CSV_HEADER: &str = "scenario,experiment,index,metric,value,tolerance,passed";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Long-format table of every metric.
pub fn metrics_csv(results: &[ScenarioResult]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        for e in &r.experiments {
            for m in &e.metrics {
                s.push_str(&format!("{},{},{},{},{:e},{},{}\n", r.name, e.kind, e.index, m.name, m.value, opt(m.tolerance), opt(m.passed)));
            }
            if e.error.is_some() {
                s.push_str(&format!("{},{},{},error,,,false\n", r.name, e.kind, e.index));
            }
        }
    }
    s
}

pub fn markdown(results: &[ScenarioResult]) -> String {
    let mut s = String::from("# Scenario report\n\n");
    if results.is_empty() {
        s.push_str("No scenarios were run.\n");
        return s;
    }
    s.push_str("| scenario | K | nodes | experiments | status |\n|---|---|---|---|---|\n");
    for r in results {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.name,
            r.k,
            r.nodes,
            r.experiments.len(),
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    let mut failed = Vec::new();
    for r in results {
        for e in &r.experiments {
            if let Some(err) = &e.error {
                failed.push(format!("- {} / {} #{}: error: {}", r.name, e.kind, e.index, err));
            }
            for m in e.metrics.iter().filter(|m| m.passed == Some(false)) {
                failed.push(format!(
                    "- {} / {} #{}: `{}` = {:.3e}, tolerance {}",
                    r.name,
                    e.kind,
                    e.index,
                    m.name,
                    m.value,
                    m.tolerance.map(|t| format!("{t:.3e}")).unwrap_or_else(|| "n/a".into())
                ));
            }
        }
    }
    s.push_str("\n## Failed invariants\n\n");
    if failed.is_empty() {
        s.push_str("None.\n");
    } else {
        s.push_str(&failed.join("\n"));
        s.push('\n');
    }
    s.push_str("\n## Metrics\n");
    for r in results {
        for e in &r.experiments {
            s.push_str(&format!("\n### {} / {} #{}\n\n| metric | value | tolerance | passed |\n|---|---|---|---|\n", r.name, e.kind, e.index));
            for m in &e.metrics {
                let tol = m.tolerance.map(|t| format!("{t:.3e}")).unwrap_or_default();
                s.push_str(&format!("| {} | {:.4e} | {} | {} |\n", m.name, m.value, tol, opt(m.passed)));
            }
            for n in &e.notes {
                s.push_str(&format!("\n> {n}\n"));
            }
        }
    }
    s
}

/// Writes the report (and, for CSV, every artifact) into `dir`; returns the files written.
pub fn emit_report(results: &[ScenarioResult], format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let path = dir.join("report.csv");
            write_atomic(&path, metrics_csv(results).as_bytes())?;
            written.push(path);
            for r in results {
                for e in &r.experiments {
                    for a in &e.artifacts {
                        let path = dir.join(format!("{}_{}_{}_{}.csv", r.name, e.index, e.kind, a.name));
                        write_atomic(&path, a.csv.as_bytes())?;
                        written.push(path);
                    }
                }
            }
        }
        ReportFormat::Json => {
            let path = dir.join("report.json");
            write_atomic(&path, serde_json::to_string_pretty(results)?.as_bytes())?;
            written.push(path);
        }
        ReportFormat::Md => {
            let path = dir.join("report.md");
            write_atomic(&path, markdown(results).as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Reads results back from a `report.json`.
pub fn load_results(path: &Path) -> Result<Vec<ScenarioResult>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::run::{ExperimentResult, Metric};

    fn sample() -> ScenarioResult {
        ScenarioResult {
            name: "demo".into(),
            config_hash: "abc".into(),
            seed: 1,
            k: 0.0,
            dimension: 1,
            nodes: 8,
            passed: false,
            experiments: vec![ExperimentResult {
                index: 0,
                kind: "be2".into(),
                passed: false,
                metrics: vec![Metric::at_most("be2_worst_defect", 0.01, 5e-3), Metric::info("c_2", 0.4)],
                artifacts: vec![],
                notes: vec![],
                error: None,
                wall_clock_s: 0.0,
            }],
            wall_clock_s: 0.0,
            version: "0".into(),
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(metrics_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn markdown_lists_failures() {
        let md = markdown(&[sample()]);
        assert!(md.contains("`be2_worst_defect` = 1.000e-2, tolerance 5.000e-3"));
    }

    #[test]
    fn json_round_trip_and_atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&[sample()], ReportFormat::Json, dir.path()).unwrap();
        assert_eq!(load_results(&files[0]).unwrap(), vec![sample()]);
        assert!(!dir.path().join("report.json.tmp").exists());
        let csv = emit_report(&[sample()], ReportFormat::Csv, dir.path()).unwrap();
        let text = fs::read_to_string(&csv[0]).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!("pdf".parse::<ReportFormat>().is_err());
    }
}
