use super::rows::{read_rows, Field, RawRow};
use crate::{CliError, Result};
use dbpi_core::popframe::{FeatureKind, FeatureSchema, FeatureSpec, FinitePopulation, Unit};
use serde::{Deserialize, Serialize};
use std::path::Path;

const ID: &str = "id";
const Y: &str = "y";
const ADMIN: &str = "admin_value";

/// Feature columns plus the domain columns of a population file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSchema {
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub domains: Vec<String>,
}

impl PopulationSchema {
    pub fn feature_schema(&self) -> FeatureSchema {
        FeatureSchema { features: self.features.clone() }
    }

    fn columns(&self) -> Vec<&str> {
        let mut c = vec![ID];
        c.extend(self.features.iter().map(|f| f.name.as_str()));
        c.extend([Y, ADMIN]);
        c.extend(self.domains.iter().map(String::as_str));
        c
    }
}

/// JSON, or TOML when the extension is `.toml`.
pub fn read_schema(path: &Path) -> Result<PopulationSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
        toml::from_str(&text).map_err(|e| CliError::format(path, e))
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
    }
}

fn feature_value(row: &RawRow, spec: &FeatureSpec) -> Result<f64> {
    match &spec.kind {
        FeatureKind::Continuous => row.req_num(&spec.name),
        FeatureKind::Categorical { labels } => {
            let label = row.req_text(&spec.name)?;
            if let Some(code) = labels.iter().position(|l| *l == label) {
                return Ok(code as f64);
            }
            match row.fields.get(&spec.name) {
                Some(Field::Num(v)) if v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < labels.len() => Ok(*v),
                _ => Err(CliError::row(
                    &row.path,
                    row.index,
                    format!("unknown label `{label}` for categorical feature `{}`", spec.name),
                )),
            }
        }
    }
}

/// Reads a population from CSV (header row, one unit per row) or a JSON array
/// of objects. The `y` and `admin_value` columns are optional.
pub fn ingest_population(path: &Path, schema: &PopulationSchema) -> Result<FinitePopulation> {
    let (headers, rows) = read_rows(path)?;
    let allowed = schema.columns();
    if let Some(h) = headers.iter().find(|h| !allowed.contains(&h.as_str())) {
        return Err(CliError::format(path, format!("column `{h}` is not in the schema")));
    }
    let is_json = super::is_json(path);
    for need in std::iter::once(ID).chain(schema.features.iter().map(|f| f.name.as_str())) {
        if !is_json && !headers.iter().any(|h| h == need) {
            return Err(CliError::format(path, format!("missing column `{need}`")));
        }
    }
    let mut units = Vec::with_capacity(rows.len());
    for row in &rows {
        let id = row.req_text(ID)?;
        let x = schema.features.iter().map(|f| feature_value(row, f)).collect::<Result<Vec<f64>>>()?;
        let mut unit = Unit::new(id, x, row.num(Y)?);
        unit.admin_value = row.num(ADMIN)?;
        for d in &schema.domains {
            unit = unit.with_domain(d, &row.req_text(d)?);
        }
        units.push(unit);
    }
    Ok(FinitePopulation::new(schema.feature_schema(), units)?)
}

fn feature_cell(spec: &FeatureSpec, v: f64) -> serde_json::Value {
    match &spec.kind {
        FeatureKind::Continuous => serde_json::json!(v),
        FeatureKind::Categorical { labels } => match labels.get(v as usize) {
            Some(l) => serde_json::Value::String(l.clone()),
            None => serde_json::json!(v),
        },
    }
}

/// Writes a population in the format [`ingest_population`] reads.
pub fn export_population(population: &FinitePopulation, schema: &PopulationSchema, path: &Path) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(serde_json::Value::Null, |v| serde_json::json!(v));
    let records: Vec<Vec<(&str, serde_json::Value)>> = population
        .units()
        .iter()
        .map(|u| {
            let mut r = vec![(ID, serde_json::Value::String(u.id.clone()))];
            for (f, v) in schema.features.iter().zip(&u.x) {
                r.push((f.name.as_str(), feature_cell(f, *v)));
            }
            r.push((Y, opt(u.y)));
            r.push((ADMIN, opt(u.admin_value)));
            for d in &schema.domains {
                let label = u.domains.get(d).cloned().unwrap_or_default();
                r.push((d.as_str(), serde_json::Value::String(label)));
            }
            r
        })
        .collect();
    let bytes = if super::is_json(path) {
        let arr: Vec<serde_json::Map<String, serde_json::Value>> =
            records.into_iter().map(|r| r.into_iter().map(|(k, v)| (k.to_string(), v)).collect()).collect();
        serde_json::to_vec_pretty(&arr).map_err(|e| CliError::format(path, e))?
    } else {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(schema.columns()).map_err(|e| CliError::format(path, e))?;
        for r in records {
            let cells = r.into_iter().map(|(_, v)| match v {
                serde_json::Value::Null => String::new(),
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            });
            w.write_record(cells).map_err(|e| CliError::format(path, e))?;
        }
        w.into_inner().map_err(|e| CliError::format(path, e.to_string()))?
    };
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
