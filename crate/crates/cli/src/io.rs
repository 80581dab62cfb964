//! CSV series, JSON reports and output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{CliError, CliResult};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A `t,value` series as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Parses a CSV with header `t,value`. Errors carry the 1-based line number.
pub fn parse_series(text: &str, path: &Path) -> CliResult<Series> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let bad = |line: u64, msg: String| CliError::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
        return Err(bad(
            1,
            format!(
                "expected header `t,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(bad(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let parse = |i: usize, name: &str| -> CliResult<f64> {
            let v: f64 = rec[i].parse().map_err(|_| {
                bad(
                    line,
                    format!("cannot parse {name} `{}` as a number", &rec[i]),
                )
            })?;
            if !v.is_finite() {
                return Err(bad(line, format!("{name} `{}` is not finite", &rec[i])));
            }
            Ok(v)
        };
        times.push(parse(0, "t")?);
        values.push(parse(1, "value")?);
    }
    if times.is_empty() {
        return Err(bad(2, "no data rows".into()));
    }
    Ok(Series { times, values })
}

pub fn read_series(path: &Path) -> CliResult<Series> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_series(&text, path)
}

pub fn format_series(times: &[f64], values: &[f64]) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in times.iter().zip(values) {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

pub fn write_series(path: &Path, times: &[f64], values: &[f64]) -> CliResult<()> {
    write_text(path, &format_series(times, values))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Tidy CSV from a header and string rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Absolute form of a user path, so embedded configs replay from any
/// working directory.
pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    fs::canonicalize(path).map_err(io_err(path))
}
