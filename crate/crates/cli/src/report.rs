//! Versioned run reports: verdict rows plus plot-ready tables.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fs;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
        }
    }
}

/// One checked inequality or identity; both sides are always reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub std_error: f64,
    pub verdict: Verdict,
    pub rule: String,
}

impl Row {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, std_error: f64, ok: bool, rule: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            std_error,
            verdict: Verdict::from_bool(ok),
            rule: rule.into(),
        }
    }
}

/// Column-labelled numeric table, written as its own CSV file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub toolkit_version: &'static str,
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    /// The resolved configuration.
    pub config: serde_json::Value,
    pub rows: Vec<Row>,
    pub tables: Vec<Table>,
    pub all_pass: bool,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "lhs", "rhs", "std_error", "verdict", "rule"])?;
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                r.lhs.to_string(),
                r.rhs.to_string(),
                r.std_error.to_string(),
                r.verdict.as_str().to_string(),
                r.rule.clone(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn table_csv(table: &Table) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.columns)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Writes `report.json` and/or `report.csv` plus one CSV per table.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        if format.json() {
            fs::write(dir.join("report.json"), self.to_json()?)?;
        }
        if format.csv() {
            fs::write(dir.join("report.csv"), self.rows_csv()?)?;
            for t in &self.tables {
                fs::write(dir.join(format!("{}.csv", t.name)), Self::table_csv(t)?)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }
}

/// Shortest round-trip formatting, stable across runs.
pub fn num(x: f64) -> String {
    x.to_string()
}
