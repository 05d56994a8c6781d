//! Weekly disaggregation of a quarterly sampling design.
//!
//! Units of a quarterly sample are interviewed in one of 13 weeks. The
//! probability of each week given selection in the quarter is measured with a
//! probability model fitted on past assignments, giving weekly inclusion
//! probabilities `pi_W = P(week W | selected) pi_Q`.

use crate::math::sqrt;
use crate::predictors::{Dataset, Predictor, Task, TrainSpec};
use crate::rng;
use crate::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const WEEKS: usize = 13;
/// Lower bound applied to measured assignment probabilities.
pub const PROBABILITY_FLOOR: f64 = 1e-4;
/// Quarters of history used to fit the assignment model.
pub const DEFAULT_WINDOW: u32 = 6;
pub const BOOTSTRAP_RESAMPLES: usize = 500;
pub const RAKING_TOLERANCE: f64 = 1e-10;
pub const RAKING_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatingRecord {
    pub id: String,
    pub quarter: u32,
    /// Quarterly inclusion probability.
    pub pi_quarter: f64,
    /// Assigned week, `1..=13`.
    pub week: u32,
    pub covariates: Vec<f64>,
    /// First time in the sample (the only records used to learn assignment).
    pub first_selection: bool,
    pub domain: String,
    pub respondent: bool,
    /// Class indicators `delta_k(C)`.
    #[serde(default)]
    pub indicators: BTreeMap<String, f64>,
    /// Calibration category per margin variable.
    #[serde(default)]
    pub categories: BTreeMap<String, String>,
}

/// Weekly and monthly inclusion probabilities of one quarterly sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyDesign {
    pub ids: Vec<String>,
    pub pi_quarter: Vec<f64>,
    /// Assignment probabilities, one row of 13 per unit.
    pub assignment: Vec<[f64; WEEKS]>,
    /// Covariates never seen in training; the row is uniform.
    pub unseen: Vec<bool>,
    /// At least one probability was raised to the floor.
    pub clipped: Vec<bool>,
}

impl WeeklyDesign {
    /// `pi_W = P(week | selected) pi_Q`, weeks numbered from 1.
    pub fn pi_week(&self, k: usize, week: u32) -> f64 {
        self.assignment[k][week as usize - 1] * self.pi_quarter[k]
    }

    pub fn pi_month(&self, k: usize, weeks: &[u32]) -> f64 {
        weeks.iter().map(|&w| self.pi_week(k, w)).sum()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }
}

/// Weeks of each month within a quarter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthPartition {
    pub weeks_per_month: Vec<u32>,
}

impl Default for MonthPartition {
    fn default() -> Self {
        MonthPartition { weeks_per_month: vec![4, 4, 5] }
    }
}

impl MonthPartition {
    pub fn new(weeks_per_month: Vec<u32>) -> Result<Self> {
        if weeks_per_month.iter().sum::<u32>() != WEEKS as u32 || weeks_per_month.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "month lengths {weeks_per_month:?} must be positive and sum to {WEEKS}"
            )));
        }
        Ok(MonthPartition { weeks_per_month })
    }

    /// Weeks (from 1) of month `m` (from 0).
    pub fn weeks(&self, m: usize) -> Result<Vec<u32>> {
        let len = *self.weeks_per_month.get(m).ok_or_else(|| Error::InvalidConfig(format!("no month {m}")))?;
        let start: u32 = self.weeks_per_month[..m].iter().sum();
        Ok((start + 1..=start + len).collect())
    }
}

/// Fits a 13-class probability model on first-selection records of the
/// last `window` quarters (up to and including `quarter`) and evaluates it on
/// the units of `quarter` itself. There is deliberately no hold-out: the
/// probabilities describe this very dataset.
pub fn measure_assignment_probs(
    records: &[RotatingRecord],
    quarter: u32,
    window: u32,
    spec: &TrainSpec,
) -> Result<WeeklyDesign> {
    let first = quarter.saturating_sub(window.saturating_sub(1));
    let train: Vec<&RotatingRecord> =
        records.iter().filter(|r| r.first_selection && (first..=quarter).contains(&r.quarter)).collect();
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    for r in records {
        if !(1..=WEEKS as u32).contains(&r.week) {
            return Err(Error::BadClassLabel { label: f64::from(r.week), classes: WEEKS });
        }
        if !(r.pi_quarter > 0.0 && r.pi_quarter <= 1.0) {
            return Err(Error::ZeroInclusion(r.id.clone()));
        }
    }
    let rows: Vec<&[f64]> = train.iter().map(|r| r.covariates.as_slice()).collect();
    let y: Vec<f64> = train.iter().map(|r| f64::from(r.week - 1)).collect();
    let model = Predictor::fit(
        &spec.clone().with_task(Task::Probability { n_classes: WEEKS }),
        &Dataset::from_rows(&rows, y, None)?,
    )?;
    let seen: Vec<&[f64]> = rows.clone();
    let mut design = WeeklyDesign {
        ids: Vec::new(),
        pi_quarter: Vec::new(),
        assignment: Vec::new(),
        unseen: Vec::new(),
        clipped: Vec::new(),
    };
    for r in records.iter().filter(|r| r.quarter == quarter) {
        let known = seen.contains(&r.covariates.as_slice());
        let (row, clipped) = if known {
            let p = model.predict_proba(&r.covariates)?;
            floor_probabilities(&p)
        } else {
            ([1.0 / WEEKS as f64; WEEKS], false)
        };
        design.ids.push(r.id.clone());
        design.pi_quarter.push(r.pi_quarter);
        design.assignment.push(row);
        design.unseen.push(!known);
        design.clipped.push(clipped);
    }
    if design.ids.is_empty() {
        return Err(Error::Empty("no units in the requested quarter"));
    }
    Ok(design)
}

/// Raises probabilities below the floor and rescales the rest so the row
/// still sums to one.
fn floor_probabilities(p: &[f64]) -> ([f64; WEEKS], bool) {
    let mut out = [0.0; WEEKS];
    let low: Vec<bool> = p.iter().map(|&v| v < PROBABILITY_FLOOR).collect();
    let n_low = low.iter().filter(|&&b| b).count();
    if n_low == 0 {
        let s: f64 = p.iter().sum();
        for (o, v) in out.iter_mut().zip(p) {
            *o = v / s;
        }
        return (out, false);
    }
    let mass_high: f64 = p.iter().zip(&low).filter(|(_, &l)| !l).map(|(v, _)| v).sum();
    let room = 1.0 - n_low as f64 * PROBABILITY_FLOOR;
    for i in 0..WEEKS {
        out[i] = if low[i] { PROBABILITY_FLOOR } else { p[i] / mass_high * room };
    }
    (out, true)
}

/// Population totals per calibration variable and category.
pub type Margins = BTreeMap<String, BTreeMap<String, f64>>;

/// Iterative proportional fitting of `weights` to the `margins`.
pub fn rake(weights: &[f64], categories: &[&BTreeMap<String, String>], margins: &Margins) -> Result<Vec<f64>> {
    if margins.is_empty() {
        return Err(Error::EmptyMargins);
    }
    // category index per unit and variable
    let vars: Vec<(&String, Vec<(&String, f64)>)> =
        margins.iter().map(|(v, m)| (v, m.iter().map(|(c, t)| (c, *t)).collect())).collect();
    let mut cell = vec![vec![0usize; weights.len()]; vars.len()];
    for (j, (var, cats)) in vars.iter().enumerate() {
        for (k, c) in categories.iter().enumerate() {
            let label = c.get(*var).ok_or_else(|| Error::MissingMarginCategory {
                variable: (*var).clone(),
                category: String::from("<absent>"),
            })?;
            cell[j][k] = cats
                .iter()
                .position(|(c, _)| *c == label)
                .ok_or_else(|| Error::MissingMarginCategory { variable: (*var).clone(), category: label.clone() })?;
        }
    }
    let mut w = weights.to_vec();
    for _ in 0..RAKING_MAX_ITER {
        for (j, (_, cats)) in vars.iter().enumerate() {
            let mut sums = vec![0.0; cats.len()];
            for k in 0..w.len() {
                sums[cell[j][k]] += w[k];
            }
            for k in 0..w.len() {
                let c = cell[j][k];
                if sums[c] > 0.0 {
                    w[k] *= cats[c].1 / sums[c];
                }
            }
        }
        let mut worst: f64 = 0.0;
        for (j, (_, cats)) in vars.iter().enumerate() {
            let mut sums = vec![0.0; cats.len()];
            for k in 0..w.len() {
                sums[cell[j][k]] += w[k];
            }
            for (s, (_, t)) in sums.iter().zip(cats) {
                let dev = if *t == 0.0 { s.abs() } else { ((s - t) / t).abs() };
                worst = worst.max(dev);
            }
        }
        if worst < RAKING_TOLERANCE {
            return Ok(w);
        }
    }
    Err(Error::RakingDiverged(RAKING_MAX_ITER))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyEstimate {
    pub week: u32,
    pub estimate: f64,
    pub n_respondents: usize,
}

fn indicator(r: &RotatingRecord, class: &str) -> Result<f64> {
    r.indicators.get(class).copied().ok_or_else(|| Error::UnknownVariable(class.into()))
}

/// Respondents of a week and their design weights `1 / pi_W`.
fn week_respondents<'a>(
    records: &'a [RotatingRecord],
    design: &WeeklyDesign,
    week: u32,
) -> Result<(Vec<&'a RotatingRecord>, Vec<f64>)> {
    let index: BTreeMap<&str, usize> = design.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut rs = Vec::new();
    let mut d = Vec::new();
    for r in records.iter().filter(|r| r.week == week && r.respondent) {
        if let Some(&k) = index.get(r.id.as_str()) {
            rs.push(r);
            d.push(1.0 / design.pi_week(k, week));
        }
    }
    Ok((rs, d))
}

fn calibrated_total(
    rs: &[&RotatingRecord],
    d: &[f64],
    class: &str,
    domain: Option<&str>,
    margins: Option<&Margins>,
) -> Result<f64> {
    let w = match margins {
        Some(m) => {
            let cats: Vec<&BTreeMap<String, String>> = rs.iter().map(|r| &r.categories).collect();
            rake(d, &cats, m)?
        }
        None => d.to_vec(),
    };
    let mut total = 0.0;
    for (r, w) in rs.iter().zip(&w) {
        if domain.is_none_or(|dm| r.domain == dm) {
            total += w * indicator(r, class)?;
        }
    }
    Ok(total)
}

/// `A_W = sum_{r_W} w_k delta_k(C)` over the respondents of `week` in
/// `domain`, with HT weights `1 / pi_W` optionally raked to `margins`.
pub fn weekly_estimate(
    records: &[RotatingRecord],
    design: &WeeklyDesign,
    week: u32,
    class: &str,
    domain: Option<&str>,
    margins: Option<&Margins>,
) -> Result<WeeklyEstimate> {
    let (rs, d) = week_respondents(records, design, week)?;
    let n = rs.iter().filter(|r| domain.is_none_or(|dm| r.domain == dm)).count();
    if n == 0 {
        return Err(Error::NoRespondents(format!("week {week}, domain {}", domain.unwrap_or("all"))));
    }
    Ok(WeeklyEstimate { week, estimate: calibrated_total(&rs, &d, class, domain, margins)?, n_respondents: n })
}

/// Bootstrap variance of [`weekly_estimate`] resampling the week's respondents.
#[allow(clippy::too_many_arguments)]
pub fn weekly_variance(
    records: &[RotatingRecord],
    design: &WeeklyDesign,
    week: u32,
    class: &str,
    domain: Option<&str>,
    margins: Option<&Margins>,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    let (rs, d) = week_respondents(records, design, week)?;
    if rs.is_empty() {
        return Err(Error::NoRespondents(format!("week {week}")));
    }
    if resamples < 2 {
        return Err(Error::InvalidConfig("bootstrap needs at least two resamples".into()));
    }
    let n = rs.len();
    let mut values = Vec::with_capacity(resamples);
    for b in 0..resamples {
        let mut g = rng::stream(seed, b as u64);
        let mut rb = Vec::with_capacity(n);
        let mut db = Vec::with_capacity(n);
        for _ in 0..n {
            let i = g.random_range(0..n);
            rb.push(rs[i]);
            db.push(d[i]);
        }
        values.push(calibrated_total(&rb, &db, class, domain, margins)?);
    }
    Ok(crate::math::sample_variance(&values).unwrap_or(0.0))
}

/// `A_M = (1 / n_M) sum_{W in M} A_W`.
pub fn monthly_estimate(weekly: &BTreeMap<u32, f64>, weeks: &[u32]) -> Result<f64> {
    if weeks.is_empty() {
        return Err(Error::TooFewWeeks(0));
    }
    let mut s = 0.0;
    for w in weeks {
        s += weekly.get(w).ok_or(Error::MissingWeek(*w))?;
    }
    Ok(s / weeks.len() as f64)
}

/// HT estimate over the month's respondents with `pi_M = sum_{W in M} pi_W`.
pub fn monthly_estimate_pooled(
    records: &[RotatingRecord],
    design: &WeeklyDesign,
    weeks: &[u32],
    class: &str,
    domain: Option<&str>,
) -> Result<f64> {
    let index: BTreeMap<&str, usize> = design.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut total = 0.0;
    let mut n = 0;
    for r in records.iter().filter(|r| r.respondent && weeks.contains(&r.week)) {
        if !domain.is_none_or(|dm| r.domain == dm) {
            continue;
        }
        if let Some(&k) = index.get(r.id.as_str()) {
            total += indicator(r, class)? / design.pi_month(k, weeks);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoRespondents(format!("weeks {weeks:?}")));
    }
    Ok(total)
}

/// Delete-one-week jackknife variance of the monthly mean,
/// `(n-1)/n sum_i (theta_(i) - theta_(.))^2`, evaluated as
/// `sum_i (a_i - a_bar)^2 / (n (n-1))` on values shifted by the first one, so
/// equal weekly estimates give exactly zero.
pub fn jackknife_variance(weekly: &[f64]) -> Result<f64> {
    let n = weekly.len();
    if n < 2 {
        return Err(Error::TooFewWeeks(n));
    }
    let d: Vec<f64> = weekly.iter().map(|v| v - weekly[0]).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let ss: f64 = d.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok(ss / (n * (n - 1)) as f64)
}

/// `V_JK + (1 / n_M) sum_W V(A_W)`.
pub fn monthly_variance(weekly: &[f64], weekly_variances: &[f64]) -> Result<f64> {
    if weekly.len() != weekly_variances.len() {
        return Err(Error::SchemaMismatch { expected: weekly.len(), found: weekly_variances.len() });
    }
    let jk = jackknife_variance(weekly)?;
    Ok(jk + weekly_variances.iter().sum::<f64>() / weekly.len() as f64)
}

/// Standard error helper for reports.
pub fn standard_error(variance: f64) -> f64 {
    sqrt(variance.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::ModelKind;

    fn rec(k: usize, week: u32, stratum: f64, pi: f64) -> RotatingRecord {
        let mut indicators = BTreeMap::new();
        indicators.insert("employed".into(), f64::from(u8::from(!k.is_multiple_of(3))));
        let mut categories = BTreeMap::new();
        categories.insert("sex".into(), if k.is_multiple_of(2) { "m".into() } else { "f".into() });
        RotatingRecord {
            id: format!("u{k}"),
            quarter: 0,
            pi_quarter: pi,
            week,
            covariates: vec![stratum],
            first_selection: true,
            domain: if k.is_multiple_of(4) { "north".into() } else { "south".into() },
            respondent: true,
            indicators,
            categories,
        }
    }

    fn forest() -> TrainSpec {
        TrainSpec::new(ModelKind::BaggedTrees { n_trees: 1, max_depth: 16, min_leaf: 1 })
    }

    #[test]
    fn deterministic_assignment_is_one_hot() {
        let recs: Vec<_> = (0..130).map(|k| rec(k, (k % 13) as u32 + 1, (k % 13) as f64, 0.01)).collect();
        let d = measure_assignment_probs(&recs, 0, DEFAULT_WINDOW, &forest()).unwrap();
        for k in 0..130 {
            let w = (k % 13) as u32 + 1;
            assert!((d.pi_week(k, w) - 0.01 * (1.0 - 12.0 * PROBABILITY_FLOOR)).abs() < 1e-12, "{:?}", d.assignment[k]);
            let s: f64 = (1..=13).map(|w| d.pi_week(k, w)).sum();
            assert!((s - 0.01).abs() < 1e-12);
            assert!(d.clipped[k]);
        }
    }

    #[test]
    fn unseen_covariates_get_uniform_rows() {
        let mut recs: Vec<_> = (0..26).map(|k| rec(k, (k % 13) as u32 + 1, 1.0, 0.1)).collect();
        recs[0].first_selection = false;
        recs[0].covariates = vec![99.0];
        let d = measure_assignment_probs(&recs, 0, DEFAULT_WINDOW, &forest()).unwrap();
        assert!(d.unseen[0]);
        assert!(d.assignment[0].iter().all(|&p| (p - 1.0 / 13.0).abs() < 1e-15));
    }

    #[test]
    fn raking_fixed_point_and_two_cells() {
        let cats: Vec<BTreeMap<String, String>> = ["a", "a", "b"]
            .iter()
            .map(|c| {
                let mut m = BTreeMap::new();
                m.insert("g".to_string(), c.to_string());
                m
            })
            .collect();
        let refs: Vec<&BTreeMap<String, String>> = cats.iter().collect();
        let mut margins = Margins::new();
        margins.insert("g".into(), [("a".to_string(), 5.0), ("b".to_string(), 4.0)].into_iter().collect());
        let w = rake(&[2.0, 3.0, 4.0], &refs, &margins).unwrap();
        assert_eq!(w, vec![2.0, 3.0, 4.0]);
        let w = rake(&[1.0, 1.0, 1.0], &refs, &margins).unwrap();
        assert!((w[0] - 2.5).abs() < 1e-12 && (w[2] - 4.0).abs() < 1e-12);
        assert_eq!(rake(&[1.0], &refs[..1], &Margins::new()), Err(Error::EmptyMargins));
    }

    #[test]
    fn uncalibrated_week_total() {
        let recs: Vec<_> = (0..26).map(|k| rec(k, (k % 13) as u32 + 1, 0.0, 0.2)).collect();
        let d = measure_assignment_probs(&recs, 0, DEFAULT_WINDOW, &forest()).unwrap();
        let e = weekly_estimate(&recs, &d, 1, "employed", None, None).unwrap();
        let expect: f64 =
            [0usize, 13].iter().map(|&k| f64::from(u8::from(!k.is_multiple_of(3))) / d.pi_week(k, 1)).sum();
        assert!((e.estimate - expect).abs() < 1e-9);
        assert_eq!(e.n_respondents, 2);
    }

    #[test]
    fn month_arithmetic() {
        let w: BTreeMap<u32, f64> = [(1, 10.0), (2, 20.0), (3, 30.0), (4, 40.0)].into_iter().collect();
        assert_eq!(monthly_estimate(&w, &[1, 2, 3, 4]).unwrap(), 25.0);
        assert_eq!(monthly_estimate(&w, &[1, 5]), Err(Error::MissingWeek(5)));
        let p = MonthPartition::default();
        assert_eq!(p.weeks(2).unwrap(), vec![9, 10, 11, 12, 13]);
    }

    #[test]
    fn jackknife_cases() {
        assert_eq!(monthly_variance(&[5.0; 4], &[1.0, 2.0, 3.0, 2.0]).unwrap(), 2.0);
        // leave-one-out means 25, 20, 15 around 20
        let v = jackknife_variance(&[10.0, 20.0, 30.0]).unwrap();
        assert!((v - 2.0 / 3.0 * 50.0).abs() < 1e-12);
        assert_eq!(jackknife_variance(&[0.1 + 0.2; 3]).unwrap(), 0.0);
        assert_eq!(jackknife_variance(&[1.0]), Err(Error::TooFewWeeks(1)));
    }
}
