//! Prediction algorithms `mu(x, s)` trained on samples.
//!
//! Three model families are available: ordinary (optionally weighted) least
//! squares, k-nearest neighbours and bagged CART trees. KNN and trees also
//! have a probability mode for class targets coded `0..n_classes`.

mod knn;
mod ols;
mod trees;

use crate::popframe::FinitePopulation;
use crate::{Error, Result};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use trees::Tree;

/// Row-major training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n_features: usize,
    y: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, n_features: usize, y: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if x.len() != y.len() * n_features {
            return Err(Error::SchemaMismatch { expected: y.len() * n_features, found: x.len() });
        }
        if let Some(w) = &weights {
            if w.len() != y.len() {
                return Err(Error::SchemaMismatch { expected: y.len(), found: w.len() });
            }
            if w.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::InvalidConfig("training weights must be finite and nonnegative".into()));
            }
        }
        Ok(Dataset { x, n_features, y, weights })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], y: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        let n_features = rows.first().map_or(0, |r| r.as_ref().len());
        let mut x = Vec::with_capacity(rows.len() * n_features);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_features {
                return Err(Error::SchemaMismatch { expected: n_features, found: r.len() });
            }
            x.extend_from_slice(r);
        }
        if rows.len() != y.len() {
            return Err(Error::SchemaMismatch { expected: rows.len(), found: y.len() });
        }
        Dataset::new(x, n_features, y, weights)
    }

    /// Training set made of the given population units and their targets.
    pub fn from_population(
        population: &FinitePopulation,
        members: &[usize],
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let p = population.schema().arity();
        let mut x = Vec::with_capacity(members.len() * p);
        let mut y = Vec::with_capacity(members.len());
        for &k in members {
            x.extend_from_slice(population.features(k));
            y.push(population.target(k).ok_or_else(|| Error::MissingTarget(population.unit(k).id.clone()))?);
        }
        Dataset::new(x, p, y, weights)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    Ols {
        #[serde(default = "yes")]
        intercept: bool,
    },
    Knn {
        k: usize,
    },
    BaggedTrees {
        n_trees: usize,
        max_depth: usize,
        #[serde(default = "one")]
        min_leaf: usize,
    },
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Ols { .. } => "ols",
            ModelKind::Knn { .. } => "knn",
            ModelKind::BaggedTrees { .. } => "bagged_trees",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    #[default]
    Regression,
    /// Class targets coded `0..n_classes`.
    Probability { n_classes: usize },
}

/// Loss used when comparing fitted models on held-out data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    Squared,
    Absolute,
}

impl Loss {
    /// Weighted mean loss.
    pub fn evaluate(&self, predicted: &[f64], observed: &[f64], weights: Option<&[f64]>) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (&p, &o)) in predicted.iter().zip(observed).enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            let e = p - o;
            num += w * match self {
                Loss::Squared => e * e,
                Loss::Absolute => e.abs(),
            };
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub model: ModelKind,
    /// Indices of the features the model sees; all features when absent.
    #[serde(default)]
    pub features: Option<Vec<usize>>,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub loss: Loss,
    #[serde(default)]
    pub seed: u64,
}

impl TrainSpec {
    pub fn new(model: ModelKind) -> Self {
        TrainSpec { model, features: None, task: Task::Regression, loss: Loss::Squared, seed: 0 }
    }

    pub fn ols() -> Self {
        TrainSpec::new(ModelKind::Ols { intercept: true })
    }

    pub fn with_features(mut self, features: Vec<usize>) -> Self {
        self.features = Some(features);
        self
    }

    pub fn with_task(mut self, task: Task) -> Self {
        self.task = task;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum State {
    Ols { coefficients: Vec<f64> },
    Knn(knn::Knn),
    Trees { trees: Vec<Tree> },
}

/// A fitted model. Prediction is a pure function of the stored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    spec: TrainSpec,
    n_inputs: usize,
    state: State,
}

impl Predictor {
    pub fn fit(spec: &TrainSpec, data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let selected = select(spec, data)?;
        if let Task::Probability { n_classes } = spec.task {
            if let ModelKind::Ols { .. } = spec.model {
                return Err(Error::NoProbabilityMode("ols"));
            }
            if n_classes < 2 {
                return Err(Error::InvalidConfig("probability mode needs at least two classes".into()));
            }
            for &label in selected.targets() {
                if label < 0.0 || label >= n_classes as f64 || !crate::math::is_integer(label) {
                    return Err(Error::BadClassLabel { label, classes: n_classes });
                }
            }
        }
        let state = match &spec.model {
            ModelKind::Ols { intercept } => State::Ols { coefficients: ols::fit(&selected, *intercept)? },
            ModelKind::Knn { k } => {
                if *k == 0 {
                    return Err(Error::InvalidConfig("knn needs k >= 1".into()));
                }
                State::Knn(knn::Knn::fit(&selected, *k))
            }
            ModelKind::BaggedTrees { n_trees, max_depth, min_leaf } => {
                if *n_trees == 0 || *min_leaf == 0 {
                    return Err(Error::InvalidConfig("bagged trees need n_trees >= 1 and min_leaf >= 1".into()));
                }
                let params = trees::Params { max_depth: *max_depth, min_leaf: *min_leaf, task: spec.task };
                State::Trees { trees: trees::fit_bagged(&selected, *n_trees, &params, spec.seed) }
            }
        };
        Ok(Predictor { spec: spec.clone(), n_inputs: data.n_features(), state })
    }

    pub fn spec(&self) -> &TrainSpec {
        &self.spec
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Point prediction. In probability mode this is the expected class
    /// label, which for two classes is the probability of class 1.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(match self.spec.task {
            Task::Regression => self.regress(x),
            Task::Probability { .. } => self.proba(x).iter().enumerate().map(|(c, p)| c as f64 * p).sum(),
        })
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Task::Regression = self.spec.task {
            return Err(Error::NoProbabilityMode(self.spec.model.name()));
        }
        self.check(x)?;
        Ok(self.proba(x))
    }

    /// Predictions for many rows, failing on the first malformed one.
    pub fn predict_many<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r.as_ref())).collect()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(Error::SchemaMismatch { expected: self.n_inputs, found: x.len() });
        }
        Ok(())
    }

    fn feature(&self, x: &[f64], j: usize) -> f64 {
        match &self.spec.features {
            Some(f) => x[f[j]],
            None => x[j],
        }
    }

    fn regress(&self, x: &[f64]) -> f64 {
        match &self.state {
            State::Ols { coefficients } => ols::predict(coefficients, |j| self.feature(x, j)),
            State::Knn(m) => m.regress(|j| self.feature(x, j)),
            State::Trees { trees } => {
                let s: f64 = trees.iter().map(|t| t.leaf(|j| self.feature(x, j))[0]).sum();
                s / trees.len() as f64
            }
        }
    }

    fn proba(&self, x: &[f64]) -> Vec<f64> {
        let n_classes = match self.spec.task {
            Task::Probability { n_classes } => n_classes,
            Task::Regression => unreachable!(),
        };
        match &self.state {
            State::Ols { .. } => unreachable!(),
            State::Knn(m) => m.proba(|j| self.feature(x, j), n_classes),
            State::Trees { trees } => {
                let mut p = alloc::vec![0.0; n_classes];
                for t in trees {
                    for (acc, v) in p.iter_mut().zip(t.leaf(|j| self.feature(x, j))) {
                        *acc += v;
                    }
                }
                let n = trees.len() as f64;
                p.iter_mut().for_each(|v| *v /= n);
                p
            }
        }
    }
}

fn select(spec: &TrainSpec, data: &Dataset) -> Result<Dataset> {
    let Some(features) = &spec.features else {
        return Ok(data.clone());
    };
    if let Some(&j) = features.iter().find(|&&j| j >= data.n_features()) {
        return Err(Error::SchemaMismatch { expected: data.n_features(), found: j + 1 });
    }
    let mut x = Vec::with_capacity(data.len() * features.len());
    for i in 0..data.len() {
        let row = data.row(i);
        x.extend(features.iter().map(|&j| row[j]));
    }
    Dataset::new(x, features.len(), data.y.clone(), data.weights.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ols_exact_line() {
        let d = Dataset::from_rows(&[[1.0], [2.0], [3.0]], vec![2.0, 4.0, 6.0], None).unwrap();
        let p = Predictor::fit(&TrainSpec::ols(), &d).unwrap();
        assert!((p.predict(&[10.0]).unwrap() - 20.0).abs() < 1e-10);
        assert!(p.predict(&[0.0]).unwrap().abs() < 1e-10);
        assert!(matches!(p.predict(&[1.0, 2.0]), Err(Error::SchemaMismatch { .. })));
        assert!(matches!(p.predict_proba(&[1.0]), Err(Error::NoProbabilityMode(_))));
    }

    #[test]
    fn ols_feature_subset() {
        let rows = [[1.0, 5.0], [2.0, 1.0], [3.0, 9.0], [4.0, 2.0]];
        let d = Dataset::from_rows(&rows, vec![3.0, 5.0, 7.0, 9.0], None).unwrap();
        let p = Predictor::fit(&TrainSpec::ols().with_features(vec![0]), &d).unwrap();
        assert!((p.predict(&[3.0, -100.0]).unwrap() - 7.0).abs() < 1e-10);
    }

    #[test]
    fn doubling_weights_leaves_ols_unchanged() {
        let rows = [[1.0], [2.0], [4.0], [7.0]];
        let y = vec![1.0, 3.0, 2.0, 8.0];
        let a = Dataset::from_rows(&rows, y.clone(), Some(vec![1.0, 2.0, 3.0, 1.0])).unwrap();
        let b = Dataset::from_rows(&rows, y, Some(vec![2.0, 4.0, 6.0, 2.0])).unwrap();
        let pa = Predictor::fit(&TrainSpec::ols(), &a).unwrap();
        let pb = Predictor::fit(&TrainSpec::ols(), &b).unwrap();
        for x in [0.0, 3.0, 9.0] {
            assert!((pa.predict(&[x]).unwrap() - pb.predict(&[x]).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_interpolates() {
        let rows = [[0.0, 1.0], [3.0, 1.0], [1.0, 5.0], [8.0, 2.0]];
        let y = vec![1.5, -2.0, 7.0, 0.25];
        let d = Dataset::from_rows(&rows, y.clone(), None).unwrap();
        let p = Predictor::fit(&TrainSpec::new(ModelKind::Knn { k: 1 }), &d).unwrap();
        for (r, v) in rows.iter().zip(&y) {
            assert_eq!(p.predict(r).unwrap(), *v);
        }
    }

    #[test]
    fn single_stump_predicts_weighted_mean() {
        let rows = [[0.0], [1.0], [2.0]];
        let d = Dataset::from_rows(&rows, vec![1.0, 2.0, 6.0], Some(vec![1.0, 1.0, 2.0])).unwrap();
        let spec = TrainSpec::new(ModelKind::BaggedTrees { n_trees: 1, max_depth: 0, min_leaf: 1 });
        let p = Predictor::fit(&spec, &d).unwrap();
        for x in [-5.0, 1.0, 50.0] {
            assert!((p.predict(&[x]).unwrap() - 15.0 / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn class_labels_are_checked() {
        let d = Dataset::from_rows(&[[0.0], [1.0]], vec![0.0, 2.0], None).unwrap();
        let spec = TrainSpec::new(ModelKind::Knn { k: 1 }).with_task(Task::Probability { n_classes: 2 });
        assert!(matches!(Predictor::fit(&spec, &d), Err(Error::BadClassLabel { .. })));
        let spec = TrainSpec::ols().with_task(Task::Probability { n_classes: 2 });
        assert_eq!(Predictor::fit(&spec, &d), Err(Error::NoProbabilityMode("ols")));
    }

    #[test]
    fn separable_classes() {
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 1.0 }).collect();
        let d = Dataset::from_rows(&rows, y.clone(), None).unwrap();
        let spec = TrainSpec::new(ModelKind::BaggedTrees { n_trees: 25, max_depth: 3, min_leaf: 1 })
            .with_task(Task::Probability { n_classes: 2 })
            .with_seed(7);
        let p = Predictor::fit(&spec, &d).unwrap();
        for (r, &c) in rows.iter().zip(&y) {
            let pr = p.predict_proba(r).unwrap();
            assert!((pr[0] + pr[1] - 1.0).abs() < 1e-12);
            assert!(pr[c as usize] > 0.5);
        }
    }

    #[test]
    fn empty_training_set() {
        let d = Dataset::new(vec![], 1, vec![], None).unwrap();
        assert_eq!(Predictor::fit(&TrainSpec::ols(), &d), Err(Error::EmptyTrainingSet));
    }
}
