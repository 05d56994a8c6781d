//! Subcommand bodies. Each takes loaded inputs and returns the result table.

use crate::config::{EditingConfig, ScoreMode, TimeConfig};
use crate::io::{format_period, Field};
use crate::report::{Cell, Report};
use crate::runner::run_table1_parallel;
use crate::{CliError, Result};
use dbpi_core::adminframe::{
    criteria_scores, probability_grid, quantile_diagnostics, synthetic_values, AdminUnit, CriteriaParams,
    QuantileLevel, ReportingFlag,
};
use dbpi_core::designs::{DesignKind, SamplingDesign};
use dbpi_core::earlyest::{early_totals_by_domain, rolling_fit, PanelRecord, PanelStore};
use dbpi_core::editing::{categorical_score, continuous_score, ContinuousSpecs, EditingRecord};
use dbpi_core::efficiency::{run_relative_efficiency, EfficiencyTable, SurveyTable};
use dbpi_core::popframe::{FeatureSchema, FeatureSpec, FinitePopulation, SimulationConfig, Unit};
use dbpi_core::predictors::{ModelKind, Predictor, TrainSpec};
use dbpi_core::rng;
use dbpi_core::timedisagg::{
    measure_assignment_probs, monthly_estimate, monthly_variance, weekly_estimate, weekly_variance, Margins,
    MonthPartition, RotatingRecord, WEEKS,
};
use std::collections::BTreeMap;
use std::path::Path;

/// Gives every spec a seed derived from the master seed, when there is one.
pub fn seeded(specs: Vec<TrainSpec>, seed: Option<u64>) -> Vec<TrainSpec> {
    match seed {
        None => specs,
        Some(s) => specs.into_iter().enumerate().map(|(i, spec)| spec.with_seed(rng::derive(s, i as u64))).collect(),
    }
}

fn forest(n_trees: usize, max_depth: usize, min_leaf: usize) -> TrainSpec {
    TrainSpec::new(ModelKind::BaggedTrees { n_trees, max_depth, min_leaf })
}

pub fn simulate_srb(cfg: &SimulationConfig) -> Result<Report> {
    let mut r = Report::new(&["n1", "n2", "mse_pred", "re_pred", "mse_srb", "re_srb", "cv_mse"]);
    for row in run_table1_parallel(cfg)? {
        r.push(vec![
            row.n1.into(),
            row.n2.into(),
            row.mse_pred.into(),
            row.re_pred.into(),
            row.mse_srb.into(),
            row.re_srb.into(),
            row.cv_mse.into(),
        ]);
    }
    Ok(r)
}

pub fn edit_score(
    historic: &[EditingRecord],
    batch: &[EditingRecord],
    cfg: &EditingConfig,
    predictors: &[TrainSpec],
) -> Result<Report> {
    let first = predictors.first().cloned().unwrap_or_else(|| forest(50, 6, 5));
    let table = match cfg.mode {
        ScoreMode::Categorical => categorical_score(historic, batch, &first)?,
        ScoreMode::Continuous => {
            let specs = cfg.continuous.clone().unwrap_or(ContinuousSpecs {
                p: first,
                m: TrainSpec::ols(),
                missing: TrainSpec::ols(),
            });
            continuous_score(historic, batch, &specs)?
        }
    };
    let table = match (cfg.threshold, cfg.revision_fraction) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give either a threshold or a revision fraction, not both".into()))
        }
        (Some(t), None) => table.with_threshold(t),
        (None, Some(f)) => table.with_revision_fraction(f)?,
        (None, None) => table,
    };
    let mut r = Report::new(&["id", "score", "rank", "flag"]);
    for i in 0..table.len() {
        r.push(vec![
            table.ids[i].clone().into(),
            table.global[i].into(),
            table.rank[i].into(),
            table.flagged[i].into(),
        ]);
    }
    Ok(r)
}

pub fn early_estimate(
    records: Vec<PanelRecord>,
    period: u32,
    tau: u32,
    predictors: &[TrainSpec],
) -> Result<(Report, Predictor)> {
    let grid = if predictors.is_empty() { vec![TrainSpec::ols(), forest(100, 8, 5)] } else { predictors.to_vec() };
    let store = PanelStore::new(records)?;
    let fit = rolling_fit(&store, period, tau, &grid)?;
    let mut r = Report::new(&["period", "domain", "estimate", "mse", "n_observed", "n_predicted"]);
    for e in early_totals_by_domain(&store, period, tau, &fit.predictor)? {
        r.push(vec![
            format_period(period).into(),
            e.domain.into(),
            e.estimate.into(),
            e.mse.into(),
            e.n_observed.into(),
            e.n_predicted.into(),
        ]);
    }
    Ok((r, fit.predictor))
}

pub fn admin_select(units: &[AdminUnit], params: &CriteriaParams, predictors: &[TrainSpec]) -> Result<Report> {
    let scores = criteria_scores(units, params)?;
    let synthetic: BTreeMap<String, f64> = if scores.count(ReportingFlag::ModelReport) > 0 {
        let spec = predictors.first().cloned().unwrap_or_else(TrainSpec::ols);
        synthetic_values(units, &scores, &spec)?.into_iter().collect()
    } else {
        BTreeMap::new()
    };
    let mut headers = vec!["id"];
    headers.extend(["r1", "r2", "r3", "r4", "r5", "r6", "c1", "c2", "c3", "c4", "c5", "c6"]);
    headers.extend(["data_gap", "flag", "synthetic"]);
    let mut r = Report::new(&headers);
    for u in &scores.units {
        let mut row: Vec<Cell> = vec![u.id.clone().into()];
        row.extend(u.scores.iter().map(|&s| Cell::from(s)));
        row.extend(u.selected.iter().map(|&s| Cell::from(s)));
        row.push(u.data_gap.into());
        row.push(
            match u.flag {
                ReportingFlag::SurveyReport => "survey_report",
                ReportingFlag::ModelReport => "model_report",
            }
            .into(),
        );
        row.push(synthetic.get(&u.id).copied().into());
        r.push(row);
    }
    Ok(r)
}

pub fn admin_diagnostics(units: &[AdminUnit], points: usize) -> Result<Report> {
    let grid = probability_grid(points);
    let mut r = Report::new(&["level", "p", "survey", "admin"]);
    for (name, level) in [("sample", QuantileLevel::Sample), ("population", QuantileLevel::Population)] {
        for q in quantile_diagnostics(units, 0, level, &grid)? {
            r.push(vec![name.into(), q.p.into(), q.survey.into(), q.admin.into()]);
        }
    }
    Ok(r)
}

pub fn time_disaggregate(
    records: &[RotatingRecord],
    margins: Option<&Margins>,
    cfg: &TimeConfig,
    predictors: &[TrainSpec],
    seed: u64,
) -> Result<Report> {
    let quarter = match cfg.quarter {
        Some(q) => q,
        None => records.iter().map(|r| r.quarter).max().ok_or(dbpi_core::Error::Empty("empty panel"))?,
    };
    let spec = predictors.first().cloned().unwrap_or_else(|| forest(50, 8, 20));
    let design = measure_assignment_probs(records, quarter, cfg.window, &spec)?;
    let partition = match &cfg.weeks_per_month {
        Some(w) => MonthPartition::new(w.clone())?,
        None => MonthPartition::default(),
    };
    let current: Vec<RotatingRecord> = records.iter().filter(|r| r.quarter == quarter).cloned().collect();
    let classes: Vec<String> = {
        let mut c: Vec<String> = current.iter().flat_map(|r| r.indicators.keys().cloned()).collect();
        c.sort();
        c.dedup();
        c
    };
    let mut domains: Vec<Option<String>> = {
        let mut d: Vec<String> = current.iter().map(|r| r.domain.clone()).collect();
        d.sort();
        d.dedup();
        d.into_iter().map(Some).collect()
    };
    domains.push(None);

    let mut r = Report::new(&["period", "domain", "class", "estimate", "variance", "n_respondents"]);
    for (ci, class) in classes.iter().enumerate() {
        for (di, domain) in domains.iter().enumerate() {
            let dom = domain.as_deref();
            let label = dom.unwrap_or("all").to_string();
            let mut weekly: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
            for week in 1..=WEEKS as u32 {
                let est = match weekly_estimate(&current, &design, week, class, dom, margins) {
                    Ok(e) => e,
                    Err(dbpi_core::Error::NoRespondents(_)) => {
                        r.push(vec![
                            format!("W{week:02}").into(),
                            label.clone().into(),
                            class.clone().into(),
                            Cell::Missing,
                            Cell::Missing,
                            0usize.into(),
                        ]);
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let s = rng::derive(rng::derive(rng::derive(seed, ci as u64), di as u64), u64::from(week));
                let var = weekly_variance(&current, &design, week, class, dom, margins, cfg.resamples, s)?;
                weekly.insert(week, (est.estimate, var, est.n_respondents));
                r.push(vec![
                    format!("W{week:02}").into(),
                    label.clone().into(),
                    class.clone().into(),
                    est.estimate.into(),
                    var.into(),
                    est.n_respondents.into(),
                ]);
            }
            for m in 0..partition.weeks_per_month.len() {
                let weeks = partition.weeks(m)?;
                let ests: BTreeMap<u32, f64> = weekly.iter().map(|(w, v)| (*w, v.0)).collect();
                let row_head: Vec<Cell> =
                    vec![format!("M{}", m + 1).into(), label.clone().into(), class.clone().into()];
                if weeks.iter().all(|w| weekly.contains_key(w)) {
                    let e = monthly_estimate(&ests, &weeks)?;
                    let values: Vec<f64> = weeks.iter().map(|w| weekly[w].0).collect();
                    let vars: Vec<f64> = weeks.iter().map(|w| weekly[w].1).collect();
                    let n: usize = weeks.iter().map(|w| weekly[w].2).sum();
                    let v = monthly_variance(&values, &vars)?;
                    r.push([row_head, vec![e.into(), v.into(), n.into()]].concat());
                } else {
                    let n: usize = weeks.iter().filter_map(|w| weekly.get(w)).map(|v| v.2).sum();
                    r.push([row_head, vec![Cell::Missing, Cell::Missing, n.into()]].concat());
                }
            }
        }
    }
    Ok(r)
}

/// Population file for the relative-efficiency study: `id`, features `x_*`,
/// and any other column as a domain label (used by stratified designs).
pub fn read_frame(path: &Path) -> Result<(FinitePopulation, Vec<Vec<f64>>)> {
    let (headers, rows) = crate::io::read_rows(path)?;
    let xs: Vec<&String> = headers.iter().filter(|h| h.starts_with("x_")).collect();
    let others: Vec<&String> =
        headers.iter().filter(|h| *h != "id" && !h.starts_with("x_") && !h.starts_with("y_")).collect();
    let mut units = Vec::with_capacity(rows.len());
    let mut x = Vec::with_capacity(rows.len());
    for row in &rows {
        let f = xs.iter().map(|c| row.req_num(c)).collect::<Result<Vec<f64>>>()?;
        let mut u = Unit::new(row.req_text("id")?, f.clone(), None);
        for c in &others {
            let label = match row.fields.get(*c) {
                Some(Field::Text(s)) => s.clone(),
                Some(Field::Num(v)) => v.to_string(),
                None => String::new(),
            };
            u = u.with_domain(c, &label);
        }
        units.push(u);
        x.push(f);
    }
    let schema = FeatureSchema { features: xs.iter().map(|c| FeatureSpec::continuous(c)).collect() };
    Ok((FinitePopulation::new(schema, units)?, x))
}

pub fn relative_efficiency(
    previous: &SurveyTable,
    current_ids: &[String],
    current: &SurveyTable,
    population: &FinitePopulation,
    population_x: &[Vec<f64>],
    design: Option<&DesignKind>,
    predictors: &[TrainSpec],
) -> Result<(Report, EfficiencyTable)> {
    let kind = design.cloned().unwrap_or(DesignKind::Srswor { n: current_ids.len() });
    let design = SamplingDesign::new(kind, population)?;
    let members = current_ids
        .iter()
        .map(|id| {
            population
                .index_of(id)
                .ok_or_else(|| CliError::Config(format!("sample unit `{id}` is not in the population")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let sample = design.sample_of(members)?;
    let spec = predictors.first().cloned().unwrap_or_else(TrainSpec::ols);
    let table = run_relative_efficiency(previous, current, &design, &sample, population_x, &spec)?;
    let mut r = Report::new(&["variable", "y_pred", "y_ht", "bias_hat", "variance_hat", "quotient"]);
    for row in &table.rows {
        r.push(vec![
            row.variable.clone().into(),
            row.y_pred.into(),
            row.y_ht.into(),
            row.bias_hat.into(),
            row.variance_hat.into(),
            row.quotient.into(),
        ]);
    }
    Ok((r, table))
}
