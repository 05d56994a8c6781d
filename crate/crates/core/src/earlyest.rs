//! Early estimates of monthly totals from partially collected panels.
//!
//! At collection day `tau` of a period some sampled units have reported and
//! the rest are predicted from features that never use the unit's own
//! current value: its past values, past aggregates of its group and current
//! aggregates of the group's respondents.

use crate::math::{median, quantile};
use crate::predictors::{Dataset, Predictor, TrainSpec};
use crate::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Periods of history entering moving averages.
pub const MOVING_WINDOW: usize = 3;
/// Past periods used for per-unit prediction errors.
pub const ERROR_WINDOW: usize = 12;
/// Percentile of the group aggregates.
pub const GROUP_PERCENTILE: f64 = 0.95;

/// One sampled unit in one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    /// Months since an arbitrary origin (`12 * year + month - 1`).
    pub period: u32,
    pub unit: String,
    pub group: String,
    pub domain: String,
    #[serde(default = "one")]
    pub weight: f64,
    /// Reported values by collection day, ascending in day.
    pub observations: Vec<(u32, f64)>,
    /// The last observation is the validated final value.
    #[serde(default)]
    pub finalized: bool,
}

fn one() -> f64 {
    1.0
}

impl PanelRecord {
    /// Latest value reported up to day `tau`.
    pub fn value_at(&self, tau: u32) -> Option<f64> {
        self.observations.iter().take_while(|(d, _)| *d <= tau).last().map(|(_, v)| *v)
    }

    pub fn final_value(&self) -> Option<f64> {
        if self.finalized {
            self.observations.last().map(|(_, v)| *v)
        } else {
            None
        }
    }
}

/// All panel records, indexed by period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelStore {
    periods: BTreeMap<u32, Vec<PanelRecord>>,
}

impl PanelStore {
    pub fn new(records: Vec<PanelRecord>) -> Result<Self> {
        let mut periods: BTreeMap<u32, Vec<PanelRecord>> = BTreeMap::new();
        for mut r in records {
            if r.observations.windows(2).any(|w| w[0].0 > w[1].0) {
                r.observations.sort_by_key(|o| o.0);
            }
            let list = periods.entry(r.period).or_default();
            if list.iter().any(|o| o.unit == r.unit) {
                return Err(Error::DuplicateId(format!("{} in period {}", r.unit, r.period)));
            }
            list.push(r);
        }
        for list in periods.values_mut() {
            list.sort_by(|a, b| a.unit.cmp(&b.unit));
        }
        Ok(PanelStore { periods })
    }

    pub fn period(&self, period: u32) -> &[PanelRecord] {
        self.periods.get(&period).map_or(&[], |v| v.as_slice())
    }

    pub fn periods(&self) -> impl Iterator<Item = u32> + '_ {
        self.periods.keys().copied()
    }

    fn final_of(&self, period: u32, unit: &str) -> Option<f64> {
        let list = self.periods.get(&period)?;
        let i = list.binary_search_by(|r| r.unit.as_str().cmp(unit)).ok()?;
        list[i].final_value()
    }

    fn group_finals(&self, period: u32) -> BTreeMap<&str, Vec<f64>> {
        let mut out: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in self.period(period) {
            if let Some(v) = r.final_value() {
                out.entry(r.group.as_str()).or_default().push(v);
            }
        }
        out
    }
}

pub const FEATURE_NAMES: [&str; 6] =
    ["unit_lag1", "unit_ma3", "group_mean_lag1", "group_p95_lag1", "group_growth_cur", "group_p95_cur"];

/// Features of every sampled unit of a period at collection day `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub period: u32,
    pub tau: u32,
    pub units: Vec<String>,
    pub groups: Vec<String>,
    pub domains: Vec<String>,
    pub weights: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    /// Value reported by day `tau`, if any.
    pub observed: Vec<Option<f64>>,
    pub target: Vec<Option<f64>>,
    /// The current-aggregate block fell back to past aggregates.
    pub fallback: Vec<bool>,
}

impl FeatureFrame {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

pub fn build_features(store: &PanelStore, period: u32, tau: u32) -> Result<FeatureFrame> {
    let records = store.period(period);
    if records.is_empty() {
        return Err(Error::InsufficientHistory(format!("no sample for period {period}")));
    }
    let past: Vec<u32> = (1..=MOVING_WINDOW as u32).filter_map(|l| period.checked_sub(l)).collect();
    if past.len() < MOVING_WINDOW || past.iter().any(|p| store.period(*p).is_empty()) {
        return Err(Error::InsufficientHistory(format!("period {period} needs {MOVING_WINDOW} preceding periods")));
    }
    let lag1 = period - 1;
    let past_groups = store.group_finals(lag1);
    let all_lag1: Vec<f64> = past_groups.values().flatten().copied().collect();

    // current aggregates from the respondents at tau
    let mut growth: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut current: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(v) = r.value_at(tau) {
            current.entry(r.group.as_str()).or_default().push(v);
            if let Some(prev) = store.final_of(lag1, &r.unit) {
                if prev != 0.0 {
                    growth.entry(r.group.as_str()).or_default().push(v / prev);
                }
            }
        }
    }

    let mut unit_rows: Vec<Option<(f64, f64)>> = Vec::with_capacity(records.len());
    let mut group_unit_feats: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        let hist: Vec<f64> = past.iter().filter_map(|p| store.final_of(*p, &r.unit)).collect();
        let feats = store.final_of(lag1, &r.unit).map(|l| (l, hist.iter().sum::<f64>() / hist.len() as f64));
        if let Some(f) = feats {
            group_unit_feats.entry(r.group.as_str()).or_default().push(f);
        }
        unit_rows.push(feats);
    }

    let mut frame = FeatureFrame {
        period,
        tau,
        units: Vec::new(),
        groups: Vec::new(),
        domains: Vec::new(),
        weights: Vec::new(),
        rows: Vec::new(),
        observed: Vec::new(),
        target: Vec::new(),
        fallback: Vec::new(),
    };
    for (r, unit_feats) in records.iter().zip(unit_rows) {
        let g = r.group.as_str();
        let past_vals = past_groups.get(g);
        let (lag, ma) = match unit_feats {
            Some(f) => f,
            None => {
                let pool = group_unit_feats
                    .get(g)
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| Error::NoHistory(r.unit.clone()))?;
                let l: Vec<f64> = pool.iter().map(|f| f.0).collect();
                let m: Vec<f64> = pool.iter().map(|f| f.1).collect();
                (median(&l).unwrap_or(0.0), median(&m).unwrap_or(0.0))
            }
        };
        let (g_mean, g_p95) = match past_vals {
            Some(v) if !v.is_empty() => {
                (v.iter().sum::<f64>() / v.len() as f64, quantile(v, GROUP_PERCENTILE).unwrap_or(0.0))
            }
            _ => {
                let v = &all_lag1;
                if v.is_empty() {
                    return Err(Error::NoHistory(r.unit.clone()));
                }
                (v.iter().sum::<f64>() / v.len() as f64, quantile(v, GROUP_PERCENTILE).unwrap_or(0.0))
            }
        };
        let cur = current.get(g).filter(|v| !v.is_empty());
        let gr = growth.get(g).filter(|v| !v.is_empty());
        let fallback = cur.is_none() || gr.is_none();
        let growth_cur = gr.and_then(|v| median(v)).unwrap_or(1.0);
        let p95_cur = cur.and_then(|v| quantile(v, GROUP_PERCENTILE)).unwrap_or(g_p95);
        frame.units.push(r.unit.clone());
        frame.groups.push(r.group.clone());
        frame.domains.push(r.domain.clone());
        frame.weights.push(r.weight);
        frame.rows.push(vec![lag, ma, g_mean, g_p95, growth_cur, p95_cur]);
        frame.observed.push(r.value_at(tau));
        frame.target.push(r.final_value());
        frame.fallback.push(fallback);
    }
    Ok(frame)
}

fn dataset(frames: &[&FeatureFrame]) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for f in frames {
        for i in 0..f.len() {
            if let Some(t) = f.target[i] {
                rows.push(f.rows[i].as_slice());
                y.push(t);
                w.push(f.weights[i]);
            }
        }
    }
    Dataset::from_rows(&rows, y, Some(w))
}

/// Outcome of model selection on the rolling schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingFit {
    pub predictor: Predictor,
    pub selected: usize,
    pub test_losses: Vec<f64>,
}

/// Trains every candidate on periods up to `period - 2`, selects on
/// `period - 1` by weighted loss and refits the winner on both.
pub fn rolling_fit(store: &PanelStore, period: u32, tau: u32, grid: &[TrainSpec]) -> Result<RollingFit> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty model grid".into()));
    }
    let test_period = period
        .checked_sub(1)
        .ok_or_else(|| Error::InsufficientHistory(format!("period {period} has no predecessor")))?;
    let test = build_features(store, test_period, tau)
        .map_err(|_| Error::InsufficientHistory(format!("no test period before {period}")))?;
    let train: Vec<FeatureFrame> =
        store.periods().filter(|&p| p < test_period).filter_map(|p| build_features(store, p, tau).ok()).collect();
    if train.is_empty() {
        return Err(Error::InsufficientHistory(format!("no training period before {test_period}")));
    }
    let train_refs: Vec<&FeatureFrame> = train.iter().collect();
    let train_data = dataset(&train_refs)?;
    let test_data = dataset(&[&test])?;
    if train_data.is_empty() || test_data.is_empty() {
        return Err(Error::InsufficientHistory("no finalised targets in the rolling window".into()));
    }
    let mut losses = Vec::with_capacity(grid.len());
    for spec in grid {
        let model = Predictor::fit(spec, &train_data)?;
        let pred = (0..test_data.len()).map(|i| model.predict(test_data.row(i))).collect::<Result<Vec<_>>>()?;
        losses.push(spec.loss.evaluate(&pred, test_data.targets(), test_data.weights()));
    }
    let selected = (0..losses.len()).fold(0, |b, i| if losses[i] < losses[b] { i } else { b });
    let mut all = train_refs;
    all.push(&test);
    let predictor = Predictor::fit(&grid[selected], &dataset(&all)?)?;
    Ok(RollingFit { predictor, selected, test_losses: losses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyEstimate {
    pub domain: String,
    pub estimate: f64,
    pub mse: f64,
    pub n_observed: usize,
    pub n_predicted: usize,
}

/// Mean squared past prediction error per unit over the last
/// `ERROR_WINDOW` periods, applying `predictor` to the features those
/// periods had at `tau`.
pub fn past_unit_errors(
    store: &PanelStore,
    period: u32,
    tau: u32,
    predictor: &Predictor,
) -> Result<BTreeMap<String, f64>> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let first = period.saturating_sub(ERROR_WINDOW as u32);
    for p in first..period {
        let Ok(frame) = build_features(store, p, tau) else { continue };
        for i in 0..frame.len() {
            if let Some(t) = frame.target[i] {
                let e = predictor.predict(&frame.rows[i])? - t;
                let slot = acc.entry(frame.units[i].clone()).or_default();
                slot.0 += e * e;
                slot.1 += 1;
            }
        }
    }
    Ok(acc.into_iter().map(|(u, (s, c))| (u, s / c as f64)).collect())
}

/// `Z = sum_{responded} z(tau) + sum_{not yet responded} z_hat`, restricted
/// to `domain` when given, with the summed per-unit squared-error estimates
/// of the predicted units.
pub fn early_total(
    store: &PanelStore,
    period: u32,
    tau: u32,
    predictor: &Predictor,
    domain: Option<&str>,
) -> Result<EarlyEstimate> {
    let frame = build_features(store, period, tau)?;
    let errors = past_unit_errors(store, period, tau, predictor)?;
    early_total_from(&frame, predictor, &errors, domain)
}

/// As [`early_total`], with the feature frame and past errors precomputed.
pub fn early_total_from(
    frame: &FeatureFrame,
    predictor: &Predictor,
    errors: &BTreeMap<String, f64>,
    domain: Option<&str>,
) -> Result<EarlyEstimate> {
    let members: Vec<usize> = (0..frame.len()).filter(|&i| domain.is_none_or(|d| frame.domains[i] == d)).collect();
    let name = domain.unwrap_or("all").into();
    if members.is_empty() {
        return Err(Error::EmptyDomain(name));
    }
    let mut group_errors: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for i in 0..frame.len() {
        if let Some(e) = errors.get(&frame.units[i]) {
            group_errors.entry(frame.groups[i].as_str()).or_default().push(*e);
        }
    }
    let overall: Vec<f64> = errors.values().copied().collect();
    let (mut estimate, mut mse, mut n_obs, mut n_pred) = (0.0, 0.0, 0, 0);
    for i in members {
        match frame.observed[i] {
            Some(v) => {
                estimate += v;
                n_obs += 1;
            }
            None => {
                estimate += predictor.predict(&frame.rows[i])?;
                mse += match errors.get(&frame.units[i]) {
                    Some(e) => *e,
                    None => group_errors
                        .get(frame.groups[i].as_str())
                        .and_then(|v| median(v))
                        .or_else(|| median(&overall))
                        .unwrap_or(0.0),
                };
                n_pred += 1;
            }
        }
    }
    Ok(EarlyEstimate { domain: name, estimate, mse, n_observed: n_obs, n_predicted: n_pred })
}

/// Early estimates per domain plus their sum, listed last as `all`.
pub fn early_totals_by_domain(
    store: &PanelStore,
    period: u32,
    tau: u32,
    predictor: &Predictor,
) -> Result<Vec<EarlyEstimate>> {
    let frame = build_features(store, period, tau)?;
    let errors = past_unit_errors(store, period, tau, predictor)?;
    let mut domains: Vec<&str> = frame.domains.iter().map(String::as_str).collect();
    domains.sort_unstable();
    domains.dedup();
    let mut out = domains
        .into_iter()
        .map(|d| early_total_from(&frame, predictor, &errors, Some(d)))
        .collect::<Result<Vec<_>>>()?;
    let mut all = EarlyEstimate { domain: "all".into(), estimate: 0.0, mse: 0.0, n_observed: 0, n_predicted: 0 };
    for e in &out {
        all.estimate += e.estimate;
        all.mse += e.mse;
        all.n_observed += e.n_observed;
        all.n_predicted += e.n_predicted;
    }
    out.push(all);
    Ok(out)
}
