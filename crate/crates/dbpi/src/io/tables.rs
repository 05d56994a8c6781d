use super::rows::{read_rows, RawRow};
use crate::{CliError, Result};
use dbpi_core::adminframe::{AdminPeriod, AdminUnit};
use dbpi_core::earlyest::PanelRecord;
use dbpi_core::editing::EditingRecord;
use dbpi_core::efficiency::SurveyTable;
use dbpi_core::timedisagg::{Margins, RotatingRecord};
use std::collections::BTreeMap;
use std::path::Path;

/// Columns starting with `prefix`, in file order, with the prefix removed.
fn prefixed<'a>(headers: &'a [String], prefix: &str) -> Vec<(&'a str, &'a str)> {
    headers.iter().filter_map(|h| h.strip_prefix(prefix).map(|rest| (h.as_str(), rest))).collect()
}

fn features(row: &RawRow, cols: &[(&str, &str)]) -> Result<Vec<f64>> {
    cols.iter().map(|(c, _)| row.req_num(c)).collect()
}

/// `YYYY-MM` to months since year zero; a bare integer is taken as is.
pub fn parse_period(s: &str) -> std::result::Result<u32, String> {
    let s = s.trim();
    if let Ok(p) = s.parse::<u32>() {
        return Ok(p);
    }
    let bad = || format!("period `{s}` is not YYYY-MM");
    let (y, m) = s.split_once('-').ok_or_else(bad)?;
    let y: u32 = y.parse().map_err(|_| bad())?;
    let m: u32 = m.parse().map_err(|_| bad())?;
    if !(1..=12).contains(&m) {
        return Err(bad());
    }
    Ok(12 * y + m - 1)
}

pub fn format_period(p: u32) -> String {
    format!("{:04}-{:02}", p / 12, p % 12 + 1)
}

/// Columns `id, weight, raw, validated, x_*`.
pub fn read_editing_records(path: &Path) -> Result<Vec<EditingRecord>> {
    let (headers, rows) = read_rows(path)?;
    let aux = prefixed(&headers, "x_");
    rows.iter()
        .map(|r| {
            Ok(EditingRecord {
                id: r.req_text("id")?,
                weight: r.num("weight")?.unwrap_or(1.0),
                raw: r.num("raw")?,
                validated: r.num("validated")?,
                aux: features(r, &aux)?,
            })
        })
        .collect()
}

/// Long format, one row per reported value:
/// `period, unit, group, domain, weight, day, value, finalized`.
/// A row without `day` registers the unit with no reports.
pub fn read_panel(path: &Path) -> Result<Vec<PanelRecord>> {
    let (_, rows) = read_rows(path)?;
    let mut order: Vec<(u32, String)> = Vec::new();
    let mut recs: BTreeMap<(u32, String), PanelRecord> = BTreeMap::new();
    for r in &rows {
        let period = parse_period(&r.req_text("period")?).map_err(|m| CliError::row(path, r.index, m))?;
        let unit = r.req_text("unit")?;
        let key = (period, unit.clone());
        let group = r.req_text("group")?;
        let domain = r.req_text("domain")?;
        let weight = r.num("weight")?.unwrap_or(1.0);
        let rec = recs.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            PanelRecord {
                period,
                unit,
                group: group.clone(),
                domain: domain.clone(),
                weight,
                observations: Vec::new(),
                finalized: false,
            }
        });
        if rec.group != group || rec.domain != domain {
            return Err(CliError::row(
                path,
                r.index,
                format!("unit `{}` changes group or domain within a period", rec.unit),
            ));
        }
        rec.finalized |= r.flag("finalized", false)?;
        if r.has("day") {
            rec.observations.push((r.int("day")?, r.req_num("value")?));
        }
    }
    Ok(order
        .into_iter()
        .map(|k| {
            let mut rec = recs.remove(&k).expect("key recorded");
            rec.observations.sort_by_key(|o| o.0);
            rec
        })
        .collect())
}

/// Long format, one row per unit and lag:
/// `id, domain, in_frame, frame_size, x_*, lag, weight, admin, survey, current_admin`.
/// `lag` 1 is the most recent completed period.
pub fn read_admin_units(path: &Path) -> Result<Vec<AdminUnit>> {
    let (headers, rows) = read_rows(path)?;
    let xs = prefixed(&headers, "x_");
    let mut order: Vec<String> = Vec::new();
    let mut units: BTreeMap<String, AdminUnit> = BTreeMap::new();
    for r in &rows {
        let id = r.req_text("id")?;
        let unit = match units.get_mut(&id) {
            Some(u) => u,
            None => {
                order.push(id.clone());
                units.entry(id.clone()).or_insert(AdminUnit {
                    id,
                    domain: r.req_text("domain")?,
                    in_frame: r.flag("in_frame", true)?,
                    frame_size: r.num("frame_size")?.unwrap_or(0.0),
                    x: features(r, &xs)?,
                    periods: Vec::new(),
                    current_admin: None,
                })
            }
        };
        if let Some(c) = r.num("current_admin")? {
            unit.current_admin = Some(c);
        }
        if !r.has("lag") {
            continue;
        }
        let lag = r.int("lag")? as usize;
        if lag == 0 {
            return Err(CliError::row(path, r.index, "lag starts at 1"));
        }
        if unit.periods.len() < lag {
            unit.periods.resize(lag, None);
        }
        if unit.periods[lag - 1].is_some() {
            return Err(CliError::row(path, r.index, format!("unit `{}` repeats lag {lag}", unit.id)));
        }
        unit.periods[lag - 1] = Some(AdminPeriod {
            weight: r.num("weight")?.unwrap_or(1.0),
            admin: r.num("admin")?,
            survey: r.num("survey")?,
        });
    }
    Ok(order.into_iter().map(|id| units.remove(&id).expect("id recorded")).collect())
}

/// `id, quarter, pi_quarter, week, first_selection, domain, respondent`,
/// covariates `x_*`, class indicators `class_*`, calibration categories `cal_*`.
pub fn read_rotating(path: &Path) -> Result<Vec<RotatingRecord>> {
    let (headers, rows) = read_rows(path)?;
    let xs = prefixed(&headers, "x_");
    let classes = prefixed(&headers, "class_");
    let cals = prefixed(&headers, "cal_");
    rows.iter()
        .map(|r| {
            let mut indicators = BTreeMap::new();
            for (col, name) in &classes {
                if let Some(v) = r.num(col)? {
                    indicators.insert(name.to_string(), v);
                }
            }
            let mut categories = BTreeMap::new();
            for (col, name) in &cals {
                if let Some(v) = r.text(col) {
                    categories.insert(name.to_string(), v);
                }
            }
            Ok(RotatingRecord {
                id: r.req_text("id")?,
                quarter: r.int("quarter")?,
                pi_quarter: r.req_num("pi_quarter")?,
                week: r.int("week")?,
                covariates: features(r, &xs)?,
                first_selection: r.flag("first_selection", false)?,
                domain: r.req_text("domain")?,
                respondent: r.flag("respondent", true)?,
                indicators,
                categories,
            })
        })
        .collect()
}

/// `variable, category, total`.
pub fn read_margins(path: &Path) -> Result<Margins> {
    let (_, rows) = read_rows(path)?;
    let mut m = Margins::new();
    for r in &rows {
        let var = r.req_text("variable")?;
        let cat = r.req_text("category")?;
        if m.entry(var.clone()).or_default().insert(cat.clone(), r.req_num("total")?).is_some() {
            return Err(CliError::row(path, r.index, format!("margin {var}/{cat} given twice")));
        }
    }
    Ok(m)
}

/// `id, x_*, y_*`; returns the ids alongside the table.
pub fn read_survey_table(path: &Path) -> Result<(Vec<String>, SurveyTable)> {
    let (headers, rows) = read_rows(path)?;
    let xs = prefixed(&headers, "x_");
    let ys = prefixed(&headers, "y_");
    let mut ids = Vec::with_capacity(rows.len());
    let mut table = SurveyTable { features: Vec::with_capacity(rows.len()), variables: BTreeMap::new() };
    for (_, name) in &ys {
        table.variables.insert(name.to_string(), Vec::with_capacity(rows.len()));
    }
    for r in &rows {
        ids.push(r.req_text("id")?);
        table.features.push(features(r, &xs)?);
        for (col, name) in &ys {
            table.variables.get_mut(*name).expect("inserted").push(r.req_num(col)?);
        }
    }
    Ok((ids, table))
}
