use std::io::Write;

use serde::Serialize;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Rows as CSV, preceded by a `# config: <json>` comment line.
pub fn write_csv<W: Write, C: Serialize, R: Serialize>(mut out: W, config: &C, rows: &[R]) -> Result<(), ReportError> {
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    schema_version: u32,
    kind: &'a str,
    config: &'a C,
    rows: &'a [R],
}

/// Rows as a pretty JSON document carrying the config and a schema version.
pub fn write_json<W: Write, C: Serialize, R: Serialize>(
    mut out: W,
    kind: &str,
    config: &C,
    rows: &[R],
) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut out, &Envelope { schema_version: SCHEMA_VERSION, kind, config, rows })?;
    writeln!(out)?;
    Ok(())
}

pub fn write_report<W: Write, C: Serialize, R: Serialize>(
    out: W,
    format: Format,
    kind: &str,
    config: &C,
    rows: &[R],
) -> Result<(), ReportError> {
    match format {
        Format::Csv => write_csv(out, config, rows),
        Format::Json => write_json(out, kind, config, rows),
    }
}
