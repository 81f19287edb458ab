//! Experiment reports and their CSV/JSON export.
//!
//! CSV rows carry only data (no timestamps), so identical runs produce
//! byte-identical files; JSON wraps the report in an envelope whose only
//! extra field is the generation time. Floats are printed with 17
//! significant digits and round-trip exactly.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::fmt_f64;

/// Output format of CLI artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Per-noise-level results of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub rmse: f64,
    pub rmse_stderr: f64,
    pub oracle_inf: f64,
    /// `rmse / oracle_inf`.
    pub ratio: f64,
    pub mean_steps: f64,
    pub emergency_fraction: f64,
    pub z_violations: usize,
    pub replicates: usize,
    pub seed: u64,
}

/// Full experiment report: per-delta rows plus optional rate slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub artifact_version: String,
    /// Verbatim configuration echo.
    pub config: serde_json::Value,
    pub rows: Vec<DeltaRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_slope_theory: Option<f64>,
}

/// JSON envelope; the timestamp lives here and only here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub generated_unix_seconds: u64,
    pub report: MCReport,
}

/// CSV header shared by `mc` and `rate` outputs.
pub const CSV_HEADER: &str =
    "delta,rmse,rmse_stderr,oracle_inf,ratio,mean_steps,emergency_fraction,z_violations,replicates,seed";

impl MCReport {
    /// Renders the CSV body: header plus one row per ladder point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                fmt_f64(row.delta),
                fmt_f64(row.rmse),
                fmt_f64(row.rmse_stderr),
                fmt_f64(row.oracle_inf),
                fmt_f64(row.ratio),
                fmt_f64(row.mean_steps),
                fmt_f64(row.emergency_fraction),
                row.z_violations,
                row.replicates,
                row.seed,
            ));
        }
        out
    }
}

/// Writes `bytes` to `path` atomically: temp file in the same directory,
/// then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_owned(),
    });
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Exports the report to `path` in the requested format. JSON output wraps
/// the report in a [`ReportEnvelope`]; CSV output is timestamp-free.
pub fn export_report(report: &MCReport, path: &Path, format: OutputFormat) -> Result<()> {
    let bytes = match format {
        OutputFormat::Csv => report.to_csv().into_bytes(),
        OutputFormat::Json => {
            let envelope = ReportEnvelope {
                generated_unix_seconds: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                report: report.clone(),
            };
            let mut text = serde_json::to_string_pretty(&envelope)?;
            text.push('\n');
            text.into_bytes()
        }
    };
    atomic_write(path, &bytes)
}

/// Reads back a JSON report written by [`export_report`].
pub fn read_report_json(path: &Path) -> Result<MCReport> {
    let text = fs::read_to_string(path)?;
    let envelope: ReportEnvelope = serde_json::from_str(&text)?;
    Ok(envelope.report)
}
