//! Relative efficiency of a pretrained prediction estimator against HT.
//!
//! A model fitted on a previous sample predicts every unit of the current
//! population; its bias is estimated HT-style on the current sample and
//! compared with the HT standard error.

use crate::designs::{ht_total_values, ht_variance_estimate, Sample, SamplingDesign};
use crate::math::sqrt;
use crate::predictors::{Dataset, Predictor, TrainSpec};
use crate::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Feature rows plus one column per target variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyTable {
    pub features: Vec<Vec<f64>>,
    pub variables: BTreeMap<String, Vec<f64>>,
}

impl SurveyTable {
    fn check(&self) -> Result<()> {
        for v in self.variables.values() {
            if v.len() != self.features.len() {
                return Err(Error::SchemaMismatch { expected: self.features.len(), found: v.len() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub variable: String,
    pub y_pred: f64,
    pub y_ht: f64,
    pub bias_hat: f64,
    pub variance_hat: f64,
    /// `|B| / sqrt(V(Y_HT))`; below one the prediction estimator is preferred.
    pub quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyTable {
    pub rows: Vec<EfficiencyRow>,
    pub below_one: usize,
}

/// `prev` trains one model per variable; `cur` holds the rows of `sample`
/// (in member order) drawn with `design`; `population` holds the features of
/// every current unit.
pub fn run_relative_efficiency(
    prev: &SurveyTable,
    cur: &SurveyTable,
    design: &SamplingDesign,
    sample: &Sample,
    population: &[Vec<f64>],
    spec: &TrainSpec,
) -> Result<EfficiencyTable> {
    prev.check()?;
    cur.check()?;
    if cur.features.len() != sample.len() {
        return Err(Error::SchemaMismatch { expected: sample.len(), found: cur.features.len() });
    }
    for name in prev.variables.keys() {
        if !cur.variables.contains_key(name) {
            return Err(Error::UnknownVariable(name.clone()));
        }
    }
    if cur.variables.is_empty() {
        return Err(Error::Empty("no target variables"));
    }
    let train_rows: Vec<&[f64]> = prev.features.iter().map(|r| r.as_slice()).collect();
    let mut rows = Vec::with_capacity(cur.variables.len());
    for (name, y) in &cur.variables {
        let y_prev = prev.variables.get(name).ok_or_else(|| Error::UnknownVariable(name.clone()))?;
        let model = Predictor::fit(spec, &Dataset::from_rows(&train_rows, y_prev.clone(), None)?)?;
        let y_pred: f64 = model.predict_many(population)?.iter().sum();
        let fitted = model.predict_many(&cur.features)?;
        let residual: Vec<f64> = fitted.iter().zip(y).map(|(f, y)| f - y).collect();
        let bias_hat = ht_total_values(sample, &residual)?;
        let y_ht = ht_total_values(sample, y)?;
        let variance_hat = ht_variance_estimate(design, sample, y)?;
        let quotient = if variance_hat > 0.0 { bias_hat.abs() / sqrt(variance_hat) } else { f64::INFINITY };
        rows.push(EfficiencyRow { variable: name.clone(), y_pred, y_ht, bias_hat, variance_hat, quotient });
    }
    let below_one = rows.iter().filter(|r| r.quotient < 1.0).count();
    Ok(EfficiencyTable { rows, below_one })
}
