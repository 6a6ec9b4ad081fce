//! Serialization of result tables as CSV or JSON lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use super::runner::{ResultRow, ResultTable};
use crate::baselines::SchemeKind;
use crate::error::{Error, Result};

pub const COLUMNS: [&str; 8] = [
    "sweep_key", "slot", "scheme", "beta", "mean_rate", "stderr", "n", "failures",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" | "json-lines" => Ok(Self::JsonLines),
            _ => Err(Error::InvalidInput(format!("unknown format `{s}` (csv or jsonl)"))),
        }
    }
}

/// `x` with 9 significant digits, in plain notation when that is short.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_results<W: Write>(table: &ResultTable, out: W, format: Format) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<output>", e);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let csv_err = |e: csv::Error| Error::InvalidInput(format!("csv output: {e}"));
            w.write_record(COLUMNS).map_err(csv_err)?;
            for r in &table.rows {
                w.write_record([
                    r.sweep_key.clone(),
                    opt_cell(r.slot),
                    r.scheme.name().to_string(),
                    opt_cell(r.beta.map(sig9)),
                    sig9(r.mean_rate),
                    sig9(r.stderr),
                    r.n.to_string(),
                    r.failures.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(io)
        }
        Format::JsonLines => {
            let mut w = out;
            let num = |x: f64| -> Value {
                sig9(x)
                    .parse::<f64>()
                    .ok()
                    .and_then(serde_json::Number::from_f64)
                    .map_or(Value::Null, Value::Number)
            };
            for r in &table.rows {
                let mut obj = Map::new();
                obj.insert("sweep_key".into(), json!(r.sweep_key));
                obj.insert("slot".into(), json!(r.slot));
                obj.insert("scheme".into(), json!(r.scheme.name()));
                obj.insert("beta".into(), r.beta.map_or(Value::Null, num));
                obj.insert("mean_rate".into(), num(r.mean_rate));
                obj.insert("stderr".into(), num(r.stderr));
                obj.insert("n".into(), json!(r.n));
                obj.insert("failures".into(), json!(r.failures));
                serde_json::to_writer(&mut w, &Value::Object(obj))
                    .map_err(|e| Error::InvalidInput(format!("json output: {e}")))?;
                w.write_all(b"\n").map_err(io)?;
            }
            w.flush().map_err(io)
        }
    }
}

/// Writes the table to `path`, creating or truncating it.
pub fn emit_results(table: &ResultTable, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(table, BufWriter::new(file), format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

fn non_empty(s: &str) -> Option<&str> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: "<results>".into(),
        line,
        msg: msg.into(),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| parse_err(line, format!("`{s}` is not a number"))),
    }
}

/// Reads back what [`write_results`] produced.
pub fn parse_results(text: &str, format: Format) -> Result<ResultTable> {
    let mut rows = Vec::new();
    match format {
        Format::Csv => {
            let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
            let headers = r.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
            if headers.iter().collect::<Vec<_>>() != COLUMNS {
                return Err(parse_err(1, "unexpected header"));
            }
            for rec in r.records() {
                let rec = rec.map_err(|e| parse_err(0, e.to_string()))?;
                let line = rec.position().map_or(0, |p| p.line() as usize);
                rows.push(ResultRow {
                    sweep_key: rec[0].to_string(),
                    slot: non_empty(&rec[1])
                        .map(|s| s.parse().map_err(|_| parse_err(line, "bad slot")))
                        .transpose()?,
                    scheme: rec[2].parse()?,
                    beta: non_empty(&rec[3]).map(|s| parse_f64(s, line)).transpose()?,
                    mean_rate: parse_f64(&rec[4], line)?,
                    stderr: parse_f64(&rec[5], line)?,
                    n: rec[6].parse().map_err(|_| parse_err(line, "bad n"))?,
                    failures: rec[7].parse().map_err(|_| parse_err(line, "bad failures"))?,
                });
            }
        }
        Format::JsonLines => {
            for (i, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let line = i + 1;
                let v: Value = serde_json::from_str(l).map_err(|e| parse_err(line, e.to_string()))?;
                let f = |key: &str| -> Result<f64> {
                    match &v[key] {
                        Value::Number(n) => n.as_f64().ok_or_else(|| parse_err(line, key)),
                        Value::Null => Ok(f64::NAN),
                        _ => Err(parse_err(line, format!("`{key}` is not a number"))),
                    }
                };
                let u = |key: &str| -> Result<usize> {
                    v[key]
                        .as_u64()
                        .map(|x| x as usize)
                        .ok_or_else(|| parse_err(line, format!("`{key}` is not a count")))
                };
                rows.push(ResultRow {
                    sweep_key: v["sweep_key"].as_str().unwrap_or_default().to_string(),
                    slot: v["slot"].as_u64().map(|x| x as usize),
                    scheme: v["scheme"]
                        .as_str()
                        .ok_or_else(|| parse_err(line, "missing scheme"))?
                        .parse::<SchemeKind>()?,
                    beta: v["beta"].as_f64(),
                    mean_rate: f("mean_rate")?,
                    stderr: f("stderr")?,
                    n: u("n")?,
                    failures: u("failures")?,
                });
            }
        }
    }
    Ok(ResultTable { rows })
}
