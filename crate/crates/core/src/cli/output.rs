//! Tables, reports and run manifests on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::stats::TestReport;

use super::config::Format;
use super::CliError;

/// Long- or wide-format numeric table with a header row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    /// Writes `<dir>/<stem>.csv` or `<dir>/<stem>.json`; returns the file name.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => {
                let name = format!("{stem}.csv");
                let mut w = csv::Writer::from_path(dir.join(&name)).map_err(io_err(&name))?;
                w.write_record(&self.columns).map_err(io_err(&name))?;
                for row in &self.rows {
                    w.write_record(row.iter().map(|v| v.to_string())).map_err(io_err(&name))?;
                }
                w.flush().map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
                Ok(name)
            }
            Format::Json => {
                let name = format!("{stem}.json");
                write_json(&dir.join(&name), self)?;
                Ok(name)
            }
        }
    }
}

fn io_err(name: &str) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{name}: {e}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Creates the output directory.
pub fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

/// Long-format report table: `test,index,kind,key,value`.
pub fn write_reports(dir: &Path, reports: &[TestReport], format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            write_json(&dir.join("reports.json"), &reports)?;
            Ok("reports.json".into())
        }
        Format::Csv => {
            let name = "reports.csv";
            let mut w = csv::Writer::from_path(dir.join(name)).map_err(io_err(name))?;
            w.write_record(["test", "index", "kind", "key", "value"]).map_err(io_err(name))?;
            for (i, r) in reports.iter().enumerate() {
                let idx = i.to_string();
                let mut row = |kind: &str, key: &str, value: String| w.write_record([r.name.as_str(), &idx, kind, key, &value]);
                row("result", "pass", r.pass.to_string()).map_err(io_err(name))?;
                row("result", "statistic", r.statistic.to_string()).map_err(io_err(name))?;
                row("result", "threshold", r.threshold.to_string()).map_err(io_err(name))?;
                for (k, v) in &r.parameters {
                    row("parameter", k, v.to_string()).map_err(io_err(name))?;
                }
                for (k, v) in &r.statistics {
                    row("statistic", k, v.to_string()).map_err(io_err(name))?;
                }
                for (k, v) in &r.standard_errors {
                    row("se", k, v.to_string()).map_err(io_err(name))?;
                }
                for n in &r.notes {
                    row("note", "", n.clone()).map_err(io_err(name))?;
                }
            }
            w.flush().map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
            Ok(name.into())
        }
    }
}

/// Per-test entry of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub name: String,
    pub pass: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub standard_errors: BTreeMap<String, f64>,
}

impl From<&TestReport> for TestSummary {
    fn from(r: &TestReport) -> Self {
        Self {
            name: r.name.clone(),
            pass: r.pass,
            statistic: r.statistic,
            threshold: r.threshold,
            standard_errors: r.standard_errors.clone(),
        }
    }
}

/// Sidecar describing one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_digest: String,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub tests: Vec<TestSummary>,
}

impl RunManifest {
    pub fn new(command: &str, config_digest: String) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_digest,
            wall_time_seconds: 0.0,
            files: Vec::new(),
            tests: Vec::new(),
        }
    }

    pub fn passed(&self) -> usize {
        self.tests.iter().filter(|t| t.pass).count()
    }

    pub fn failed(&self) -> usize {
        self.tests.len() - self.passed()
    }
}

/// One row of the `report` summary.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Read(RunManifest),
    Unknown(String),
}

/// Run directories below `root`: `root` itself and its direct
/// subdirectories, when they hold a manifest or a config.
pub fn discover_runs(root: &Path) -> Result<Vec<(PathBuf, RunStatus)>, CliError> {
    if !root.is_dir() {
        return Err(CliError::Config(format!("{} is not a directory", root.display())));
    }
    let mut dirs = vec![root.to_path_buf()];
    let mut subdirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    dirs.extend(subdirs);
    Ok(dirs
        .into_iter()
        .filter(|d| d.join("manifest.json").exists() || d.join("config.json").exists())
        .map(|d| {
            let status = match fs::read_to_string(d.join("manifest.json")) {
                Err(e) => RunStatus::Unknown(format!("manifest missing: {e}")),
                Ok(text) => match serde_json::from_str::<RunManifest>(&text) {
                    Ok(m) => RunStatus::Read(m),
                    Err(e) => RunStatus::Unknown(format!("manifest corrupt: {e}")),
                },
            };
            (d, status)
        })
        .collect())
}

/// Human-readable table; returns `(text, runs passed, runs failed, unknown)`.
pub fn summarize(root: &Path, runs: &[(PathBuf, RunStatus)]) -> (String, usize, usize, usize) {
    let mut out = format!("{:<28} {:<8} {:<18} {:<8} {:>14} {:>12}  {}\n", "run", "command", "test", "status", "statistic", "threshold", "max se");
    let (mut ok, mut bad, mut unknown) = (0, 0, 0);
    for (dir, status) in runs {
        let label = dir.strip_prefix(root).ok().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let label = label.display().to_string();
        match status {
            RunStatus::Unknown(why) => {
                unknown += 1;
                out += &format!("{label:<28} {:<8} {:<18} {:<8} {why}\n", "-", "-", "UNKNOWN");
            }
            RunStatus::Read(m) => {
                if m.failed() == 0 {
                    ok += 1;
                } else {
                    bad += 1;
                }
                if m.tests.is_empty() {
                    out += &format!("{label:<28} {:<8} {:<18} {:<8}\n", m.command, "-", "PASS");
                }
                for t in &m.tests {
                    let se = t.standard_errors.values().cloned().fold(f64::NAN, f64::max);
                    let se = if se.is_nan() { "-".to_string() } else { format!("{se:.3e}") };
                    out += &format!(
                        "{label:<28} {:<8} {:<18} {:<8} {:>14.6e} {:>12.4e}  {se}\n",
                        m.command,
                        t.name,
                        if t.pass { "PASS" } else { "FAIL" },
                        t.statistic,
                        t.threshold
                    );
                }
            }
        }
    }
    out += &format!("runs: {} passed, {} failed, {} unknown\n", ok, bad, unknown);
    (out, ok, bad, unknown)
}
