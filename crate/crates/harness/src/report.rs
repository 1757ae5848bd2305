//! Tables, pass flags and their on-disk form.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => sig6(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => if *b { "Yes" } else { "No" }.to_string(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Float(v) => Some(v),
            _ => None,
        }
    }
}

/// Six significant digits, fixed notation for moderate magnitudes.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    // Rounding can carry into the next decade; use the scientific form to find out.
    let sci = format!("{:.5e}", x);
    let exp = sci
        .split('e')
        .nth(1)
        .and_then(|e| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        sci
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[idx]).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub id: ExperimentId,
    pub table: Table,
    /// One flag per acceptance criterion covered by the experiment.
    pub passes: BTreeMap<String, bool>,
    /// Rows or checks behind each failed flag.
    pub failures: Vec<String>,
    pub seed: u64,
    pub wall_time_s: f64,
    pub diagnostics: BTreeMap<String, Value>,
}

impl ExperimentReport {
    pub fn new(id: ExperimentId, table: Table, seed: u64) -> Self {
        Self {
            id,
            table,
            passes: BTreeMap::new(),
            failures: Vec::new(),
            seed,
            wall_time_s: 0.0,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.passes.values().all(|&p| p)
    }

    pub fn flag(&mut self, criterion: &str, pass: bool, why: impl FnOnce() -> String) {
        if !pass {
            self.failures.push(format!("{criterion}: {}", why()));
        }
        self.passes.insert(criterion.to_string(), pass);
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.diagnostics.insert(key.to_string(), v);
    }
}

/// SHA-256 of the canonical JSON form of the config.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    experiment: ExperimentId,
    config_hash: &'a str,
    seed: u64,
    passed: bool,
    passes: &'a BTreeMap<String, bool>,
    failures: &'a [String],
    rows: usize,
    wall_time_s: f64,
    diagnostics: &'a BTreeMap<String, Value>,
}

/// Writes `<id>.csv` and `<id>.summary.json`, returning both paths.
pub fn write_report(dir: &Path, report: &ExperimentReport, hash: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let name = report.id.name();
    let csv_path = dir.join(format!("{name}.csv"));
    fs::write(&csv_path, report.table.to_csv()?)?;
    let summary = SummaryFile {
        experiment: report.id,
        config_hash: hash,
        seed: report.seed,
        passed: report.all_passed(),
        passes: &report.passes,
        failures: &report.failures,
        rows: report.table.rows.len(),
        wall_time_s: report.wall_time_s,
        diagnostics: &report.diagnostics,
    };
    let json_path = dir.join(format!("{name}.summary.json"));
    fs::write(&json_path, serde_json::to_string_pretty(&summary)?)?;
    Ok((csv_path, json_path))
}
