//! Deterministic CSV and JSON emission.
//!
//! Every document starts with a metadata block (tool version, command, unit,
//! SHA-256 of the configuration bytes and of the data itself). Numbers in CSV
//! use 17 significant digits; JSON uses the shortest round-trip form.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, Unit};
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(i) => json!(i),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    fn csv_body(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        let io = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }

    fn json(&self) -> Value {
        json!({
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

/// Result of one subcommand: tables, and optionally a structured JSON body
/// that replaces the tables in JSON output.
#[derive(Clone, Debug, Default)]
pub struct Output {
    pub tables: Vec<Table>,
    pub json: Option<Value>,
}

#[derive(Clone, Debug)]
pub struct Metadata {
    pub command: &'static str,
    pub unit: Unit,
    pub config_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn header(meta: &Metadata, content_hash: &str) -> String {
    format!(
        "# tool: pairsource {}\n# command: {}\n# unit: {}\n# config_sha256: {}\n# content_sha256: {}\n",
        env!("CARGO_PKG_VERSION"),
        meta.command,
        meta.unit.label(),
        meta.config_sha256,
        content_hash
    )
}

/// Rendered documents as `(file suffix, bytes)`; the suffix is empty for a
/// single document.
pub fn render(output: &Output, meta: &Metadata, format: Format) -> Result<Vec<(String, Vec<u8>)>, CliError> {
    match format {
        Format::Csv => {
            if output.tables.is_empty() {
                return Err(CliError::Output(format!("{} has no tabular form", meta.command)));
            }
            let single = output.tables.len() == 1;
            output
                .tables
                .iter()
                .map(|t| {
                    let body = t.csv_body()?;
                    let mut doc = header(meta, &sha256_hex(&body)).into_bytes();
                    if !single {
                        doc.extend(format!("# table: {}\n", t.name).bytes());
                    }
                    doc.extend(body);
                    Ok((if single { String::new() } else { t.name.clone() }, doc))
                })
                .collect()
        }
        Format::Json => {
            let data = match &output.json {
                Some(v) => v.clone(),
                None => {
                    let mut m = Map::new();
                    for t in &output.tables {
                        m.insert(t.name.clone(), t.json());
                    }
                    Value::Object(m)
                }
            };
            let compact = serde_json::to_vec(&data).map_err(|e| CliError::Output(e.to_string()))?;
            let doc = json!({
                "metadata": {
                    "tool": "pairsource",
                    "version": env!("CARGO_PKG_VERSION"),
                    "command": meta.command,
                    "unit": meta.unit.label(),
                    "config_sha256": meta.config_sha256,
                    "content_sha256": sha256_hex(&compact),
                },
                "data": data,
            });
            let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Output(e.to_string()))?;
            bytes.push(b'\n');
            Ok(vec![(String::new(), bytes)])
        }
    }
}

/// `out.csv` with suffix `spectrum` becomes `out.spectrum.csv`.
fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

/// Writes the rendered documents to `out` (or stdout) and returns the paths
/// written.
pub fn emit(docs: &[(String, Vec<u8>)], out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    match out {
        Some(path) => docs
            .iter()
            .map(|(suffix, bytes)| {
                let p = suffixed(path, suffix);
                std::fs::write(&p, bytes).map_err(|e| CliError::Output(format!("cannot write {}: {e}", p.display())))?;
                Ok(p)
            })
            .collect(),
        None => {
            let mut stdout = std::io::stdout().lock();
            for (_, bytes) in docs {
                stdout.write_all(bytes).map_err(|e| CliError::Output(e.to_string()))?;
            }
            Ok(vec![])
        }
    }
}
