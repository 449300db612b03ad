//! CSV and JSON emission.
//!
//! Floats are written with 17 significant digits (`1.2345678901234567e-3`),
//! which round-trips every `f64` exactly. Non-finite values are written as
//! `nan`, `inf` and `-inf`. JSON objects have sorted keys.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Formats `v` with 17 significant digits, or as `nan` / `inf` / `-inf`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

/// Inverse of [`format_float`].
pub fn parse_float(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

/// A CSV file: relative path, fixed columns and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub path: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(path: impl Into<String>, columns: &[&'static str]) -> Self {
        Self {
            path: path.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// One embedded consistency check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Measured quantity; `null` in JSON when not finite.
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `value < tolerance`.
    pub fn below(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: value.is_finite().then_some(value),
            tolerance: Some(tolerance),
            passed: value < tolerance,
            detail: detail.into(),
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: None,
            tolerance: None,
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(scenario: &str, checks: Vec<Check>) -> Self {
        Self {
            scenario: scenario.into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

/// Serializes `value` with sorted object keys.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    // serde_json::Map is a BTreeMap without the preserve_order feature
    let v: Value = serde_json::to_value(value).map_err(|e| CliError::Output(e.to_string()))?;
    serde_json::to_string_pretty(&v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Output(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the tables as CSV, `metadata.json` and (when given)
/// `report.json` under `dir`. Returns the written paths in order.
pub fn emit_outputs(
    tables: &[Table],
    metadata: &Value,
    report: Option<&Report>,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for table in tables {
        let path = dir.join(&table.path);
        write_file(&path, &table.render())?;
        written.push(path);
    }
    let path = dir.join("metadata.json");
    write_file(&path, &to_sorted_json(metadata)?)?;
    written.push(path);
    if let Some(report) = report {
        let path = dir.join("report.json");
        write_file(&path, &to_sorted_json(report)?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_tokens() {
        assert_eq!(format_float(f64::NAN), "nan");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn floats_round_trip_exactly() {
        let values = [
            0.1,
            -1.0 / 3.0,
            f64::MIN_POSITIVE,
            f64::MAX,
            5e-324,
            123_456_789.123_456_78,
            -0.0,
        ];
        for v in values {
            let back = parse_float(&format_float(v)).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
        assert!(parse_float("nan").unwrap().is_nan());
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("x.csv", &["delta", "re_chi", "im_chi"]);
        assert_eq!(t.render(), "delta,re_chi,im_chi\n");
    }

    #[test]
    fn json_keys_are_sorted() {
        let v = serde_json::json!({"zeta": 1, "alpha": {"b": 2, "a": 1}});
        let s = to_sorted_json(&v).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
    }

    #[test]
    fn report_passes_only_when_all_checks_pass() {
        let r = Report::new(
            "x",
            vec![Check::below("a", 0.5, 1.0, ""), Check::below("b", f64::NAN, 1.0, "")],
        );
        assert!(!r.passed);
        assert_eq!(r.checks[1].value, None);
    }
}
