//! CSV result tables.

use crate::{CliError, Result};
use std::fs::File;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Missing,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(headers: &[&str]) -> Self {
        Report { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The CSV text, header first.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Config(e.to_string());
        w.write_record(&self.headers).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(format_cell)).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Text(s) => s.clone(),
        Cell::Int(i) => i.to_string(),
        Cell::Num(v) => format_number(*v),
        Cell::Missing => String::new(),
    }
}

/// Rounds to 12 significant digits and prints the shortest decimal form.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    rounded.to_string()
}

/// Writes `report` to `path`; `-` means standard output.
pub fn emit_report(report: &Report, path: &Path) -> Result<()> {
    if report.is_empty() {
        return Err(CliError::format(path, "refusing to write an empty result table"));
    }
    let text = report.to_csv()?;
    if path == Path::new("-") {
        std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))?;
        return Ok(());
    }
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}
