use crate::{CliError, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Text(String),
}

/// One input record; empty cells and JSON nulls are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub path: PathBuf,
    /// 1-based data row (the header is row 0).
    pub index: usize,
    pub fields: BTreeMap<String, Field>,
}

impl RawRow {
    fn fail(&self, message: String) -> CliError {
        CliError::row(&self.path, self.index, message)
    }

    pub fn has(&self, column: &str) -> bool {
        self.fields.contains_key(column)
    }

    pub fn num(&self, column: &str) -> Result<Option<f64>> {
        match self.fields.get(column) {
            None => Ok(None),
            Some(Field::Num(v)) => Ok(Some(*v)),
            Some(Field::Text(s)) => s
                .trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.fail(format!("non-numeric value `{s}` in column `{column}`"))),
        }
    }

    pub fn req_num(&self, column: &str) -> Result<f64> {
        self.num(column)?.ok_or_else(|| self.fail(format!("missing value in column `{column}`")))
    }

    pub fn int(&self, column: &str) -> Result<u32> {
        let v = self.req_num(column)?;
        if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
            return Err(self.fail(format!("column `{column}` needs a non-negative integer, got {v}")));
        }
        Ok(v as u32)
    }

    pub fn text(&self, column: &str) -> Option<String> {
        self.fields.get(column).map(|f| match f {
            Field::Text(s) => s.clone(),
            Field::Num(v) => v.to_string(),
        })
    }

    pub fn req_text(&self, column: &str) -> Result<String> {
        self.text(column).ok_or_else(|| self.fail(format!("missing value in column `{column}`")))
    }

    pub fn flag(&self, column: &str, default: bool) -> Result<bool> {
        match self.text(column) {
            None => Ok(default),
            Some(s) => match s.trim().to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "y" => Ok(true),
                "0" | "false" | "no" | "n" => Ok(false),
                _ => Err(self.fail(format!("column `{column}` needs a boolean, got `{s}`"))),
            },
        }
    }
}

/// Reads a CSV file (or a JSON array of objects when the extension is
/// `.json`) into the column names and the records.
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<RawRow>)> {
    if super::is_json(path) {
        read_json(path)
    } else {
        read_csv(path)
    }
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<RawRow>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    })?;
    let headers: Vec<String> = r.headers().map_err(|e| CliError::format(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::row(path, i + 1, e))?;
        let fields = headers
            .iter()
            .zip(rec.iter())
            .filter(|(_, v)| !v.is_empty())
            .map(|(h, v)| (h.clone(), Field::Text(v.to_string())))
            .collect();
        rows.push(RawRow { path: path.to_path_buf(), index: i + 1, fields });
    }
    Ok((headers, rows))
}

fn read_json(path: &Path) -> Result<(Vec<String>, Vec<RawRow>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
    let serde_json::Value::Array(items) = value else {
        return Err(CliError::format(path, "expected an array of objects"));
    };
    let mut headers: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        let serde_json::Value::Object(map) = item else {
            return Err(CliError::row(path, i + 1, "expected an object"));
        };
        let mut fields = BTreeMap::new();
        for (k, v) in map {
            if !headers.contains(&k) {
                headers.push(k.clone());
            }
            let f = match v {
                serde_json::Value::Null => continue,
                serde_json::Value::Number(n) => Field::Num(n.as_f64().unwrap_or(f64::NAN)),
                serde_json::Value::String(s) => Field::Text(s),
                serde_json::Value::Bool(b) => Field::Text(b.to_string()),
                _ => return Err(CliError::row(path, i + 1, format!("column `{k}` holds a nested value"))),
            };
            fields.insert(k, f);
        }
        rows.push(RawRow { path: path.to_path_buf(), index: i + 1, fields });
    }
    Ok((headers, rows))
}
