//! Report serialization and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::stats::ExperimentReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}` (json or csv)")),
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

/// Main payload: the full JSON object, or `trial,value` rows for CSV
/// (failed trials leave the value empty).
pub fn serialize_report(report: &ExperimentReport, format: Format) -> Result<Vec<u8>, ReportError> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = String::from("trial,value\n");
            for (t, v) in report.per_trial.iter().enumerate() {
                match v {
                    Some(x) => out.push_str(&format!("{t},{}\n", serde_json::to_string(x)?)),
                    None => out.push_str(&format!("{t},\n")),
                }
            }
            Ok(out.into_bytes())
        }
    }
}

/// Summary sidecar written next to CSV output.
pub fn serialize_summary(report: &ExperimentReport) -> Result<Vec<u8>, ReportError> {
    let sidecar = serde_json::json!({
        "config": report.config,
        "summary": report.summary,
        "sections": report.sections,
        "table": report.table,
        "seeds": report.seeds,
        "version": report.version,
    });
    let mut out = serde_json::to_vec_pretty(&sidecar)?;
    out.push(b'\n');
    Ok(out)
}

pub fn parse_report(bytes: &[u8]) -> Result<ExperimentReport, ReportError> {
    Ok(serde_json::from_slice(bytes)?)
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

/// Write the report (and, for CSV, its sidecar) atomically.
pub fn write_report(report: &ExperimentReport, path: &Path, format: Format) -> Result<(), ReportError> {
    if format == Format::Csv {
        write_atomic(&sidecar_path(path), &serialize_summary(report)?)?;
    }
    write_atomic(path, &serialize_report(report, format)?)
}
