//! CSV / JSON results, run manifests, atomic file writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::decomposition::DecompositionReport;
use crate::error::{Error, Result};
use crate::sweep::{SweepPoint, SweepResult, ENGINE_VERSION};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 14] = [
    "grid_value",
    "sd_mu",
    "sd_mu_hat",
    "mean_mu_O",
    "mean_mu_D",
    "p_good_O",
    "p_good_D",
    "darwinian_learning",
    "statistical_learning",
    "improvement",
    "se_improvement",
    "n_published_O",
    "n_published_D",
    "reason",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn report_cells(r: &DecompositionReport) -> [String; 10] {
    [
        num(r.mean_mu_o),
        num(r.mean_mu_d),
        num(r.p_good_given_o),
        num(r.p_good_given_d),
        num(r.darwinian_learning),
        num(r.statistical_learning),
        opt(r.improvement),
        opt(r.standard_errors.improvement),
        r.n_published_o.to_string(),
        r.n_published_d.to_string(),
    ]
}

fn point_row(p: &SweepPoint) -> String {
    let mut cols = vec![num(p.grid_value), num(p.sd_mu), num(p.sd_mu_hat)];
    match &p.report {
        Some(r) => {
            cols.extend(report_cells(r));
            cols.push(csv_field(r.improvement_undefined_reason.as_deref().unwrap_or("")));
        }
        None => {
            cols.extend(std::iter::repeat_n(String::new(), 10));
            cols.push(csv_field(p.failure.as_deref().unwrap_or("")));
        }
    }
    cols.join(",")
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for p in &result.points {
        out.push_str(&point_row(p));
        out.push('\n');
    }
    out
}

/// One-row CSV for a single model; grid columns hold the model's spreads.
pub fn report_csv(report: &DecompositionReport, sd_mu: f64, sd_mu_hat: f64) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    let mut cols = vec![String::new(), num(sd_mu), num(sd_mu_hat)];
    cols.extend(report_cells(report));
    cols.push(csv_field(report.improvement_undefined_reason.as_deref().unwrap_or("")));
    let _ = writeln!(out, "{}", cols.join(","));
    out
}

/// `{"schema_version": 1, "kind": kind, "data": payload}`.
pub fn versioned_json<T: Serialize>(kind: &str, payload: &T) -> Result<String> {
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "data": payload,
    });
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))
}

pub fn config_digest(canonical: &Value) -> String {
    let text = serde_json::to_string(canonical).expect("json values serialize");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub config: Value,
    pub master_seed: u64,
    pub engine_version: String,
    pub outputs: Vec<String>,
    pub defaults_applied: Vec<String>,
    pub warnings: Vec<String>,
    pub created_unix_seconds: u64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config: Value, master_seed: u64) -> Self {
        Self {
            command: command.into(),
            config_digest: config_digest(&config),
            config,
            master_seed,
            engine_version: ENGINE_VERSION.to_string(),
            outputs: Vec::new(),
            defaults_applied: Vec::new(),
            warnings: Vec::new(),
            created_unix_seconds: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    /// Writes `bytes` to `dir/name` and lists the file.
    pub fn write(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        Ok(path)
    }

    pub fn finish(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Writes a sweep in the requested formats plus its manifest.
pub fn emit_sweep(
    result: &SweepResult,
    formats: &[Format],
    dir: &Path,
    stem: &str,
    manifest: &mut RunManifest,
) -> Result<()> {
    for f in formats {
        match f {
            Format::Csv => manifest.write(dir, &format!("{stem}.csv"), sweep_csv(result).as_bytes())?,
            Format::Json => manifest.write(
                dir,
                &format!("{stem}.json"),
                versioned_json("sweep_result", result)?.as_bytes(),
            )?,
        };
    }
    Ok(())
}

pub fn emit_report(
    report: &DecompositionReport,
    sd: (f64, f64),
    formats: &[Format],
    dir: &Path,
    stem: &str,
    manifest: &mut RunManifest,
) -> Result<()> {
    for f in formats {
        match f {
            Format::Csv => manifest.write(
                dir,
                &format!("{stem}.csv"),
                report_csv(report, sd.0, sd.1).as_bytes(),
            )?,
            Format::Json => manifest.write(
                dir,
                &format!("{stem}.json"),
                versioned_json("decomposition_report", report)?.as_bytes(),
            )?,
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{fig2_model, run_sweep, Execution, SweepAxis, SweepConfig};

    fn small_sweep(hurdle: f64) -> SweepResult {
        let mut base = fig2_model();
        base.hurdle = hurdle;
        run_sweep(
            &SweepConfig {
                base,
                axis: SweepAxis::HeterogeneityQ,
                grid: vec![0.0, 0.5, 0.98],
                n_trials: 10_000,
                master_seed: 3,
            },
            Execution::default(),
        )
        .unwrap()
    }

    #[test]
    fn csv_has_one_row_per_point_and_fixed_columns() {
        let csv = sweep_csv(&small_sweep(2.0));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("0.98,"));
        assert!(lines.iter().all(|l| l.split(',').count() == CSV_COLUMNS.len()));
    }

    #[test]
    fn failed_points_keep_their_row() {
        let csv = sweep_csv(&small_sweep(1e6));
        let row = csv.lines().nth(1).unwrap();
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[9], "");
        assert!(cols[13].contains("insufficient published trials"));
    }

    #[test]
    fn csv_and_json_agree_exactly() {
        let result = small_sweep(2.0);
        let json: Value = serde_json::from_str(&versioned_json("sweep_result", &result).unwrap()).unwrap();
        let csv = sweep_csv(&result);
        for (row, point) in csv.lines().skip(1).zip(json["data"]["points"].as_array().unwrap()) {
            let cols: Vec<&str> = row.split(',').collect();
            let report = &point["report"];
            let pairs = [
                (cols[3], &report["mean_mu_O"]),
                (cols[4], &report["mean_mu_D"]),
                (cols[7], &report["darwinian_learning"]),
                (cols[9], &point["improvement"]),
            ];
            for (text, v) in pairs {
                assert_eq!(text.parse::<f64>().unwrap(), v.as_f64().unwrap());
            }
        }
    }

    #[test]
    fn digest_changes_with_settings() {
        let a = config_digest(&serde_json::json!({"a": 1, "b": 2}));
        let b = config_digest(&serde_json::json!({"b": 2, "a": 1}));
        let c = config_digest(&serde_json::json!({"a": 1, "b": 3}));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn manifest_lists_each_output_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("test", serde_json::json!({}), 42);
        m.write(dir.path(), "a.csv", b"x").unwrap();
        m.write(dir.path(), "a.csv", b"y").unwrap();
        m.finish(dir.path(), "manifest.json").unwrap();
        assert_eq!(m.outputs, vec!["a.csv".to_string()]);
        assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), b"y");
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"").unwrap();
        let err = write_atomic(&blocker.join("out.csv"), b"x").unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
