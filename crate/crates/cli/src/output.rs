use std::fs;
use std::io::{self, Write};
use std::path::Path;

use beamdiv::Error;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

/// Writes `bytes` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, Error> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_owned() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, out);
            }
        }
        Value::Null => out.push((prefix.to_owned(), String::new())),
        Value::String(s) => out.push((prefix.to_owned(), s.clone())),
        other => out.push((prefix.to_owned(), other.to_string())),
    }
}

/// Any serializable report as two-column `key,value` CSV with dotted keys.
pub fn key_value_csv<T: Serialize>(value: &T) -> Result<Vec<u8>, Error> {
    let mut rows = Vec::new();
    flatten("", &serde_json::to_value(value)?, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Angle for people: µrad below 1 mrad, mrad below 1 rad.
pub fn angle(rad: f64) -> String {
    let a = rad.abs();
    if a == 0.0 {
        "0 rad".to_owned()
    } else if a < 1e-3 {
        format!("{:.3} µrad", rad * 1e6)
    } else if a < 1.0 {
        format!("{:.4} mrad", rad * 1e3)
    } else {
        format!("{rad:.6} rad")
    }
}

pub fn rate(bps: f64) -> String {
    format!("{:.4} Gbit/s", bps / 1e9)
}

pub fn line(out: &mut String, label: &str, value: impl std::fmt::Display) {
    out.push_str(&format!("{label:<30} {value}\n"));
}

/// Machine-readable failure record printed on stderr.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub code: u8,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub message: String,
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

impl ErrorRecord {
    pub fn from_error(err: &Error) -> Self {
        let (kind, key) = match err {
            Error::Config { key, .. } => ("config", Some(key.clone()).filter(|k| !k.is_empty())),
            Error::InvalidInput { name, .. } | Error::OutOfRange { name, .. } => ("invalid_input", Some((*name).to_owned())),
            Error::MissingColumn(c) => ("missing_column", Some(c.clone())),
            Error::Script { line, .. } => ("script", Some(format!("line {line}"))),
            Error::ZeroJitter => ("invalid_input", Some("sigma".to_owned())),
            Error::MissingSensitivity => ("config", Some("link.sensitivity".to_owned())),
            Error::InsufficientData(_) => ("insufficient_data", None),
            Error::Numerical(_) | Error::LinkClosed => ("numerical", None),
            Error::Io(_) => ("io", None),
            Error::Csv(_) => ("csv", None),
            Error::Json(_) => ("json", None),
        };
        let code = if err.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        Self {
            code,
            kind,
            key,
            message: err.to_string(),
        }
    }

    pub fn usage(message: String, key: Option<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            kind: "usage",
            key,
            message,
        }
    }

    pub fn print(&self) {
        let body = serde_json::json!({ "error": self });
        eprintln!("{body}");
    }
}
