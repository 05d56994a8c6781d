//! Selective editing scores.
//!
//! Local scores are expected weighted error impacts: `d_k P(error | z)` for
//! categorical items and `d_k P(error | z) E[|e| | error, z]` for continuous
//! items. Units are revised in descending score order.

use crate::predictors::{Dataset, Predictor, Task, TrainSpec};
use crate::{Error, Result};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditingRecord {
    pub id: String,
    /// Design weight `d_k`.
    pub weight: f64,
    pub raw: Option<f64>,
    /// Validated value; known for historic records only.
    pub validated: Option<f64>,
    pub aux: Vec<f64>,
}

impl EditingRecord {
    /// Raw differs from validated; a missing raw value counts as an error.
    /// `None` when the validated value is unknown.
    pub fn is_erroneous(&self) -> Option<bool> {
        let v = self.validated?;
        Some(match self.raw {
            Some(r) => r != v,
            None => true,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    #[default]
    Max,
    Sum,
}

/// Per-unit scores with their priority ranks (1 = revise first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub ids: Vec<String>,
    /// `local[v][k]`: local score of unit `k` for variable `v`.
    pub local: Vec<Vec<f64>>,
    pub global: Vec<f64>,
    pub rank: Vec<usize>,
    pub threshold: Option<f64>,
    pub flagged: Vec<bool>,
}

impl ScoreTable {
    pub fn from_scores(ids: Vec<String>, scores: Vec<f64>) -> Self {
        ScoreTable::from_locals(ids, vec![scores], Combine::Max)
    }

    /// Combines several local scores per unit into the global score.
    pub fn from_locals(ids: Vec<String>, local: Vec<Vec<f64>>, combine: Combine) -> Self {
        let n = ids.len();
        let global: Vec<f64> = (0..n)
            .map(|k| {
                let it = local.iter().map(|v| v[k]);
                match combine {
                    Combine::Max => it.fold(0.0, f64::max),
                    Combine::Sum => it.sum(),
                }
            })
            .collect();
        let mut rank = vec![0; n];
        for (r, k) in priority(&global).into_iter().enumerate() {
            rank[k] = r + 1;
        }
        ScoreTable { ids, local, global, rank, threshold: None, flagged: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Unit indices in revision order.
    pub fn order(&self) -> Vec<usize> {
        let mut o = vec![0; self.len()];
        for (k, &r) in self.rank.iter().enumerate() {
            o[r - 1] = k;
        }
        o
    }

    /// Flags `{k : S_k >= t}`.
    pub fn with_threshold(mut self, t: f64) -> Self {
        self.flagged = self.global.iter().map(|&s| s >= t).collect();
        self.threshold = Some(t);
        self
    }

    /// Threshold chosen so that the top `ceil(fraction n)` units are flagged
    /// (more on ties).
    pub fn with_revision_fraction(self, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidConfig("revision fraction outside [0, 1]".into()));
        }
        let m = crate::math::ceil(fraction * self.len() as f64) as usize;
        if m == 0 {
            return Ok(self.with_threshold(f64::INFINITY));
        }
        let t = self.global[self.order()[m - 1]];
        Ok(self.with_threshold(t))
    }
}

/// Indices sorted by descending score; ties keep input order.
pub fn priority(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

fn probability_spec(spec: &TrainSpec) -> TrainSpec {
    spec.clone().with_task(Task::Probability { n_classes: 2 })
}

fn error_model(historic: &[&EditingRecord], spec: &TrainSpec) -> Result<Predictor> {
    let rows: Vec<&[f64]> = historic.iter().map(|r| r.aux.as_slice()).collect();
    let y: Vec<f64> = historic.iter().map(|r| f64::from(u8::from(r.is_erroneous() == Some(true)))).collect();
    Predictor::fit(&probability_spec(spec), &Dataset::from_rows(&rows, y, None)?)
}

fn training_records(historic: &[EditingRecord]) -> Result<Vec<&EditingRecord>> {
    let out: Vec<&EditingRecord> = historic.iter().filter(|r| r.validated.is_some()).collect();
    if out.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(out)
}

/// `s_k = d_k P(raw != validated | z)` from a probability model trained on
/// the historic error indicators.
pub fn categorical_score(historic: &[EditingRecord], batch: &[EditingRecord], spec: &TrainSpec) -> Result<ScoreTable> {
    let train = training_records(historic)?;
    if !train.iter().any(|r| r.is_erroneous() == Some(true)) {
        return Err(Error::NoHistoricErrors);
    }
    let model = error_model(&train, spec)?;
    let scores = batch.iter().map(|r| Ok(r.weight * model.predict_proba(&r.aux)?[1])).collect::<Result<Vec<f64>>>()?;
    Ok(ScoreTable::from_scores(batch.iter().map(|r| r.id.clone()).collect(), scores))
}

/// Model specifications for the two-part continuous score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSpecs {
    /// Error-probability model.
    pub p: TrainSpec,
    /// Error-magnitude model, trained on the erroneous historic records.
    pub m: TrainSpec,
    /// Magnitude model for records whose raw value is missing.
    pub missing: TrainSpec,
}

/// `s_k = d_k p_k m_k` for records with a raw value, `s_k = d_k m0_k` for
/// records without one, where `m0` predicts the size of the validated value.
pub fn continuous_score(
    historic: &[EditingRecord],
    batch: &[EditingRecord],
    specs: &ContinuousSpecs,
) -> Result<ScoreTable> {
    let train = training_records(historic)?;
    let observed: Vec<&EditingRecord> = train.iter().copied().filter(|r| r.raw.is_some()).collect();
    let erroneous: Vec<&EditingRecord> = observed.iter().copied().filter(|r| r.is_erroneous() == Some(true)).collect();
    let two_part = if erroneous.is_empty() {
        None
    } else {
        let p = if erroneous.len() == observed.len() { None } else { Some(error_model(&observed, &specs.p)?) };
        let rows: Vec<&[f64]> = erroneous.iter().map(|r| r.aux.as_slice()).collect();
        let y: Vec<f64> = erroneous.iter().map(|r| (r.raw.unwrap_or(0.0) - r.validated.unwrap_or(0.0)).abs()).collect();
        let m = Predictor::fit(&specs.m, &Dataset::from_rows(&rows, y, None)?)
            .map_err(|e| Error::MagnitudeModelUntrainable(alloc::format!("{e}")))?;
        Some((p, m))
    };
    let needs_missing = batch.iter().any(|r| r.raw.is_none());
    let missing_model = if needs_missing {
        let with_missing: Vec<&EditingRecord> = train.iter().copied().filter(|r| r.raw.is_none()).collect();
        let pool = if with_missing.is_empty() { &train } else { &with_missing };
        let rows: Vec<&[f64]> = pool.iter().map(|r| r.aux.as_slice()).collect();
        let y: Vec<f64> = pool.iter().map(|r| r.validated.unwrap_or(0.0).abs()).collect();
        Some(
            Predictor::fit(&specs.missing, &Dataset::from_rows(&rows, y, None)?)
                .map_err(|e| Error::MagnitudeModelUntrainable(alloc::format!("missing-raw model: {e}")))?,
        )
    } else {
        None
    };
    let mut scores = Vec::with_capacity(batch.len());
    for r in batch {
        let s = match (r.raw, &two_part, &missing_model) {
            (None, _, Some(m0)) => r.weight * m0.predict(&r.aux)?.max(0.0),
            (Some(_), None, _) => 0.0,
            (Some(_), Some((p, m)), _) => {
                let prob = match p {
                    Some(p) => p.predict_proba(&r.aux)?[1],
                    None => 1.0,
                };
                r.weight * prob * m.predict(&r.aux)?.max(0.0)
            }
            (None, _, None) => unreachable!(),
        };
        scores.push(s);
    }
    Ok(ScoreTable::from_scores(batch.iter().map(|r| r.id.clone()).collect(), scores))
}

/// Relative pseudo-bias `|Y(n_ed) - Y_val| / Y_val` for `n_ed = 0..=n`,
/// revising units in `order`. A missing raw value contributes nothing until
/// the unit is revised.
pub fn pseudo_bias_curve(records: &[EditingRecord], order: &[usize]) -> Result<Vec<f64>> {
    let mut validated_total = 0.0;
    let mut diff = Vec::with_capacity(order.len());
    for &k in order {
        let r = &records[k];
        let v = r.validated.ok_or_else(|| Error::MissingTarget(r.id.clone()))?;
        validated_total += r.weight * v;
        diff.push(r.weight * (r.raw.unwrap_or(0.0) - v));
    }
    if validated_total == 0.0 {
        return Err(Error::ZeroValidatedTotal);
    }
    let mut curve = vec![0.0; order.len() + 1];
    let mut suffix = 0.0;
    for i in (0..order.len()).rev() {
        suffix += diff[i];
        curve[i] = (suffix / validated_total).abs();
    }
    Ok(curve)
}

/// Fraction of detected errors after revising the first `i` units in
/// `order`, as points `(i / n, detected / errors)` for `i = 0..=n`.
/// Without errors the curve is the diagonal.
pub fn detection_rate_curve(order: &[usize], truth: &[bool]) -> Vec<(f64, f64)> {
    let n = order.len();
    let errors = order.iter().filter(|&&k| truth[k]).count();
    let mut out = Vec::with_capacity(n + 1);
    out.push((0.0, 0.0));
    let mut found = 0;
    for (i, &k) in order.iter().enumerate() {
        found += usize::from(truth[k]);
        let x = (i + 1) as f64 / n as f64;
        let y = if errors == 0 { x } else { found as f64 / errors as f64 };
        out.push((x, y));
    }
    out
}

/// Trapezoidal area under a detection curve.
pub fn area_under_priority(curve: &[(f64, f64)]) -> f64 {
    curve.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

/// Historic data grow with every validated batch.
#[derive(Debug, Clone, Default)]
pub struct EditingSession {
    historic: Vec<EditingRecord>,
}

impl EditingSession {
    pub fn new(historic: Vec<EditingRecord>) -> Self {
        EditingSession { historic }
    }

    pub fn historic(&self) -> &[EditingRecord] {
        &self.historic
    }

    pub fn score_categorical(&self, batch: &[EditingRecord], spec: &TrainSpec) -> Result<ScoreTable> {
        categorical_score(&self.historic, batch, spec)
    }

    pub fn score_continuous(&self, batch: &[EditingRecord], specs: &ContinuousSpecs) -> Result<ScoreTable> {
        continuous_score(&self.historic, batch, specs)
    }

    /// Appends validated records of a processed batch.
    pub fn append_validated(&mut self, batch: impl IntoIterator<Item = EditingRecord>) {
        self.historic.extend(batch.into_iter().filter(|r| r.validated.is_some()));
    }
}
