//! Selection of units that keep reporting to the survey when administrative
//! data replace the survey as primary source.
//!
//! Six criteria flag units whose statistical value cannot safely be derived
//! from their administrative record. Units flagged by none of them are
//! reported by a model of the survey value on the administrative value.

use crate::math::{median, quantile, sample_sd, weighted_quantile};
use crate::predictors::{Dataset, Predictor, TrainSpec};
use crate::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Number of past periods the criteria look at.
pub const CRITERIA_PERIODS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdminPeriod {
    /// Survey weight; 1 for take-all or newly selected units.
    pub weight: f64,
    pub admin: Option<f64>,
    pub survey: Option<f64>,
}

/// One unit of the frame with its last nine periods, most recent first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdminUnit {
    pub id: String,
    pub domain: String,
    /// Also present in the administrative source.
    pub in_frame: bool,
    /// Frame size attribute compared against the new-unit threshold.
    pub frame_size: f64,
    #[serde(default)]
    pub x: Vec<f64>,
    /// `periods[i]` is period `t - 1 - i`; `None` marks a data gap.
    pub periods: Vec<Option<AdminPeriod>>,
    /// Administrative value of the current period.
    #[serde(default)]
    pub current_admin: Option<f64>,
}

impl AdminUnit {
    fn value(p: &AdminPeriod) -> Option<f64> {
        p.survey.or(p.admin)
    }

    fn has_gap(&self) -> bool {
        self.periods.len() < CRITERIA_PERIODS
            || self.periods[..CRITERIA_PERIODS].iter().any(|p| p.is_none_or(|p| p.admin.is_none()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaParams {
    /// Quantile order of the impact criterion.
    #[serde(default = "half")]
    pub impact_quantile: f64,
    /// Frame size above which a unit counts as new/large.
    #[serde(default = "big")]
    pub frame_threshold: f64,
}

fn half() -> f64 {
    0.5
}

fn big() -> f64 {
    1e7
}

impl Default for CriteriaParams {
    fn default() -> Self {
        CriteriaParams { impact_quantile: half(), frame_threshold: big() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportingFlag {
    SurveyReport,
    ModelReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCriteria {
    pub id: String,
    /// `r1..r6`; indicator criteria hold 0 or 1.
    pub scores: [f64; 6],
    pub selected: [bool; 6],
    pub data_gap: bool,
    pub flag: ReportingFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaScores {
    pub units: Vec<UnitCriteria>,
    /// Elbow thresholds of criteria 1, 3, 4 and 5 (`None` for the indicators).
    pub thresholds: [Option<f64>; 6],
}

impl CriteriaScores {
    pub fn count(&self, flag: ReportingFlag) -> usize {
        self.units.iter().filter(|u| u.flag == flag).count()
    }
}

/// Weighted survey totals per domain and period, `Y_hat[d][i]`.
fn domain_totals(units: &[AdminUnit]) -> BTreeMap<&str, [f64; CRITERIA_PERIODS]> {
    let mut out: BTreeMap<&str, [f64; CRITERIA_PERIODS]> = BTreeMap::new();
    for u in units {
        let slot = out.entry(u.domain.as_str()).or_insert([0.0; CRITERIA_PERIODS]);
        for (i, p) in u.periods.iter().take(CRITERIA_PERIODS).enumerate() {
            if let Some(p) = p {
                if let Some(y) = p.survey {
                    slot[i] += p.weight * y;
                }
            }
        }
    }
    out
}

/// Relative administrative/survey gaps `|y_adm - y_stat| / |y_stat|`.
fn gaps(u: &AdminUnit) -> Vec<f64> {
    u.periods
        .iter()
        .take(CRITERIA_PERIODS)
        .flatten()
        .filter_map(|p| match (p.admin, p.survey) {
            (Some(a), Some(s)) if s != 0.0 => Some((a - s).abs() / s.abs()),
            _ => None,
        })
        .collect()
}

pub fn criteria_scores(units: &[AdminUnit], params: &CriteriaParams) -> Result<CriteriaScores> {
    let frame: Vec<&AdminUnit> = units.iter().filter(|u| u.in_frame).collect();
    if frame.is_empty() {
        return Err(Error::Empty("no in-frame units"));
    }
    let totals = domain_totals(units);
    let mut out = Vec::with_capacity(frame.len());
    for u in &frame {
        let gap = u.has_gap();
        let mut r = [0.0; 6];
        if !gap {
            let ps: Vec<&AdminPeriod> = u.periods[..CRITERIA_PERIODS].iter().flatten().collect();
            let tot = &totals[u.domain.as_str()];
            let mut impact = Vec::with_capacity(CRITERIA_PERIODS);
            let mut weighted = Vec::with_capacity(CRITERIA_PERIODS);
            for (i, p) in ps.iter().enumerate() {
                let z = AdminUnit::value(p).unwrap_or(0.0);
                if tot[i] <= 0.0 {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "domain `{}` has a non-positive total in period t-{}",
                        u.domain,
                        i + 1
                    )));
                }
                impact.push(p.weight * z / tot[i]);
                weighted.push(p.weight * z);
            }
            r[0] = quantile(&impact, params.impact_quantile).unwrap_or(0.0);
            let w_now = ps[0].weight;
            r[1] = f64::from(u8::from(w_now == 1.0 || u.frame_size > params.frame_threshold));
            r[2] = sample_sd(&weighted).unwrap_or(0.0);
            let g = gaps(u);
            r[3] = sample_sd(&g).unwrap_or(0.0);
            r[4] = median(&g).unwrap_or(0.0);
            r[5] = f64::from(u8::from(ps.iter().any(|p| p.admin == Some(0.0))));
        }
        out.push((u.id.clone(), r, gap));
    }
    let mut thresholds = [None; 6];
    for c in [0, 2, 3, 4] {
        let mut v: Vec<f64> = out.iter().filter(|o| !o.2).map(|o| o.1[c]).collect();
        v.sort_by(f64::total_cmp);
        thresholds[c] = Some(if v.len() >= 3 { elbow_threshold(&v)? } else { f64::INFINITY });
    }
    let units = out
        .into_iter()
        .map(|(id, scores, data_gap)| {
            let mut selected = [false; 6];
            if !data_gap {
                for c in 0..6 {
                    selected[c] = match thresholds[c] {
                        Some(t) => scores[c] > t,
                        None => scores[c] == 1.0,
                    };
                }
            }
            let flag = if data_gap || selected.iter().any(|&s| s) {
                ReportingFlag::SurveyReport
            } else {
                ReportingFlag::ModelReport
            };
            UnitCriteria { id, scores, selected, data_gap, flag }
        })
        .collect();
    Ok(CriteriaScores { units, thresholds })
}

/// Relative tolerance under which two chord distances count as tied.
pub const ELBOW_TIE_TOLERANCE: f64 = 1e-12;

/// Index of the elbow of ascending `sorted` scores: the point farthest
/// from the chord once the curve is rescaled to the unit square. Ties go
/// to the lowest index.
pub fn elbow_index(sorted: &[f64]) -> Result<Option<usize>> {
    let n = sorted.len();
    if n < 3 {
        return Err(Error::TooFewScores(n));
    }
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("elbow scores must be sorted ascending".into()));
    }
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if hi == lo {
        return Ok(None);
    }
    let d: Vec<f64> =
        sorted.iter().enumerate().map(|(i, v)| (i as f64 / (n - 1) as f64 - (v - lo) / (hi - lo)).abs()).collect();
    let max = d.iter().copied().fold(0.0, f64::max);
    Ok(d.iter().position(|&x| x >= max - ELBOW_TIE_TOLERANCE))
}

/// Threshold halfway between the elbow score and the next larger score;
/// units strictly above it are selected. Equal scores give `+inf`.
pub fn elbow_threshold(sorted: &[f64]) -> Result<f64> {
    let Some(j) = elbow_index(sorted)? else {
        return Ok(f64::INFINITY);
    };
    let v = sorted[j];
    match sorted[j..].iter().find(|&&x| x > v) {
        Some(&next) => Ok(v + (next - v) / 2.0),
        None => Ok(f64::INFINITY),
    }
}

/// Predicts the survey value of every model-reporting unit from its
/// current administrative value and covariates, with a model trained on
/// past periods where both values are known.
pub fn synthetic_values(
    units: &[AdminUnit],
    criteria: &CriteriaScores,
    spec: &TrainSpec,
) -> Result<Vec<(String, f64)>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    for u in units.iter().filter(|u| u.in_frame) {
        for p in u.periods.iter().flatten() {
            if let (Some(a), Some(s)) = (p.admin, p.survey) {
                rows.push(core::iter::once(a).chain(u.x.iter().copied()).collect());
                y.push(s);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::NoTrainingOverlap);
    }
    let model = Predictor::fit(spec, &Dataset::from_rows(&rows, y, None)?)?;
    let by_id: BTreeMap<&str, &AdminUnit> = units.iter().map(|u| (u.id.as_str(), u)).collect();
    let mut out = Vec::new();
    for c in criteria.units.iter().filter(|c| c.flag == ReportingFlag::ModelReport) {
        let u = by_id[c.id.as_str()];
        let a = u
            .current_admin
            .or_else(|| u.periods.iter().flatten().find_map(|p| p.admin))
            .ok_or_else(|| Error::MissingTarget(u.id.clone()))?;
        let x: Vec<f64> = core::iter::once(a).chain(u.x.iter().copied()).collect();
        out.push((u.id.clone(), model.predict(&x)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileLevel {
    /// Unweighted quantiles of the sampled units.
    Sample,
    /// Quantiles weighted by the survey weights.
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub p: f64,
    pub survey: f64,
    pub admin: f64,
}

/// Paired survey/administrative quantiles in period `t - 1 - period` over
/// the units carrying both values.
pub fn quantile_diagnostics(
    units: &[AdminUnit],
    period: usize,
    level: QuantileLevel,
    grid: &[f64],
) -> Result<Vec<QqPoint>> {
    let mut s = Vec::new();
    let mut a = Vec::new();
    let mut w = Vec::new();
    for u in units.iter().filter(|u| u.in_frame) {
        if let Some(Some(p)) = u.periods.get(period) {
            if let (Some(adm), Some(sv)) = (p.admin, p.survey) {
                s.push(sv);
                a.push(adm);
                w.push(p.weight);
            }
        }
    }
    if s.is_empty() {
        return Err(Error::EmptyIntersection(period));
    }
    let ones = vec![1.0; s.len()];
    let w = match level {
        QuantileLevel::Sample => &ones,
        QuantileLevel::Population => &w,
    };
    grid.iter()
        .map(|&p| {
            Ok(QqPoint {
                p,
                survey: weighted_quantile(&s, w, p).ok_or(Error::EmptyIntersection(period))?,
                admin: weighted_quantile(&a, w, p).ok_or(Error::EmptyIntersection(period))?,
            })
        })
        .collect()
}

/// Probability grid `1/(m+1), ..., m/(m+1)`.
pub fn probability_grid(m: usize) -> Vec<f64> {
    (1..=m).map(|i| i as f64 / (m + 1) as f64).collect()
}
