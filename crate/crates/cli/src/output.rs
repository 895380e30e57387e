//! Report serialization: deterministic JSON plus plot-ready CSV tables.
//!
//! The JSON report is byte-stable for identical configs: struct field order
//! is fixed, all collections are ordered and no wall-clock data enters the
//! payload (timestamps go to a sidecar). Non-finite sentinel values
//! serialize as null. Files are written atomically (temp file + rename).

use crate::config::RunConfig;
use serde::Serialize;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use sturm_heat::estimates::EstimateSuite;
use sturm_heat::vws::ExperimentReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub eigenvalues: Vec<f64>,
    pub truncation_tail: f64,
    pub times: Vec<f64>,
    pub l2_norms: Vec<f64>,
}

/// Top-level JSON report.
#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub verdict: String,
    pub warnings: Vec<String>,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Vec<EstimateSuite>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vws: Option<ExperimentReport>,
}

/// Write bytes via a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp: PathBuf = path.to_path_buf();
    let name = tmp
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    tmp.set_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json(path: &Path, report: &Report) -> io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// CSV with a header row, LF line endings and `.` decimal separators.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> io::Result<()> {
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Non-deterministic run metadata, kept out of the main report.
pub fn write_sidecar(dir: &Path, duration_ms: u128) -> io::Result<()> {
    let timestamp_ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let body = format!(
        "{{\n  \"timestamp_unix_ms\": {timestamp_ms},\n  \"duration_ms\": {duration_ms}\n}}\n"
    );
    write_atomic(&dir.join("run_info.json"), body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("sturm-heat-out-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("table.csv");
        write_csv(&path, "a,b", &["1,2".into()]).unwrap();
        write_csv(&path, "a,b", &["3,4".into()]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n3,4\n");
        fs::remove_dir_all(&dir).unwrap();
    }
}
