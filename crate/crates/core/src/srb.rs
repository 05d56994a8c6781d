//! Prediction estimators with subsampling Rao-Blackwellisation and
//! design-unbiased bias and MSE estimation.
//!
//! A sample `s` drawn by SRSWOR is split into a training part `s1` (SRSWOR
//! of size `n1` from `s`) and a test part `s2 = s \ s1`. Given `s1`, the test
//! part is an SRSWOR sample of size `n2` from `U \ s1`, which yields the
//! conditional inclusion probabilities used by the bias and MSE estimators.

use crate::combinatorics::{binomial, Subsets};
use crate::designs::{ht_total, ht_true_variance_of_targets, ht_variance_estimate, DesignKind, Sample, SamplingDesign};
use crate::math;
use crate::popframe::{generate_linear_population, FinitePopulation, SimulationConfig};
use crate::predictors::{Dataset, Predictor, TrainSpec};
use crate::rng;
use crate::{Error, Result};
use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest number of splits enumerated in exact mode by default.
pub const EXACT_CAP: u128 = 100_000;

/// The compound design giving `(s1, s2)` from a SRSWOR sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitDesign {
    population_size: usize,
    sample_size: usize,
    n1: usize,
}

impl SplitDesign {
    pub fn new(design: &SamplingDesign, n1: usize) -> Result<Self> {
        match design.kind() {
            DesignKind::Srswor { n } => SplitDesign::from_sizes(design.population_size(), *n, n1),
            other => {
                Err(Error::UnsupportedDesign(alloc::format!("sample splitting needs an SRSWOR sample, got {other:?}")))
            }
        }
    }

    pub fn from_sizes(population_size: usize, sample_size: usize, n1: usize) -> Result<Self> {
        if sample_size > population_size {
            return Err(Error::SampleTooLarge { n: sample_size, population: population_size });
        }
        if n1 == 0 || n1 >= sample_size {
            return Err(Error::InvalidSplit { n1, n: sample_size });
        }
        Ok(SplitDesign { population_size, sample_size, n1 })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.sample_size - self.n1
    }

    /// `pi_2k = n2 / (N - n1)` for every `k` outside `s1`.
    pub fn pi2(&self) -> f64 {
        self.n2() as f64 / (self.population_size - self.n1) as f64
    }

    /// `pi_2kl = n2 (n2 - 1) / ((N - n1)(N - n1 - 1))` for `k != l` outside `s1`.
    pub fn pi2_joint(&self) -> f64 {
        let n2 = self.n2() as f64;
        let m = (self.population_size - self.n1) as f64;
        if m < 2.0 {
            return 0.0;
        }
        n2 * (n2 - 1.0) / (m * (m - 1.0))
    }

    /// Number of distinct splits, `C(n, n1)`.
    pub fn split_count(&self) -> u128 {
        binomial(self.sample_size, self.n1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RbMode {
    /// Average over `splits` random splits.
    MonteCarlo { splits: usize },
    /// Average over every split; refused above `cap` splits.
    Exact {
        #[serde(default = "exact_cap")]
        cap: u128,
    },
}

fn exact_cap() -> u128 {
    EXACT_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    PredictionEstimator,
    Srb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeUsed {
    MonteCarlo,
    ExactRb,
}

/// The four terms of the MSE estimator. They recombine to
/// `mean_bias_sq - mean_var_bias + mean_var_test - var_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseComponents {
    pub mean_bias_sq: f64,
    pub mean_var_bias: f64,
    pub mean_var_test: f64,
    pub var_q: f64,
}

impl MseComponents {
    pub fn recombine(&self) -> f64 {
        self.mean_bias_sq - self.mean_var_bias + self.mean_var_test - self.var_q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub y_hat: f64,
    pub estimator_kind: EstimatorKind,
    pub bias_hat: f64,
    pub mse_hat: f64,
    pub components: MseComponents,
    pub splits_used: usize,
    pub mode: ModeUsed,
}

impl UncertaintyReport {
    /// The estimator is not truncated; a negative value is reported as is.
    pub fn mse_is_negative(&self) -> bool {
        self.mse_hat < 0.0
    }

    /// `max(mse_hat, 0)`, for display.
    pub fn mse_display(&self) -> f64 {
        self.mse_hat.max(0.0)
    }
}

/// `sum_s y_k + sum_{U \ s} mu(x_k)`.
pub fn prediction_estimator(sample: &Sample, predictor: &Predictor, population: &FinitePopulation) -> Result<f64> {
    let observed: f64 = sample.targets(population)?.iter().sum();
    let mut predicted = 0.0;
    for k in sample.complement(population.len()) {
        predicted += predictor.predict(population.features(k))?;
    }
    Ok(observed + predicted)
}

/// Random SRSWOR split of the sample into `(s1, s2)`, both as ascending
/// population indices.
pub fn split(sample: &Sample, n1: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = sample.len();
    if n1 == 0 || n1 >= n {
        return Err(Error::InvalidSplit { n1, n });
    }
    let mut rng = rng::stream(seed, 0);
    let mut pos: Vec<usize> = (0..n).collect();
    for i in 0..n1 {
        let j = rng.random_range(i..n);
        pos.swap(i, j);
    }
    Ok(split_at_positions(sample, &mut pos[..n1].to_vec()))
}

fn split_at_positions(sample: &Sample, positions: &mut [usize]) -> (Vec<usize>, Vec<usize>) {
    positions.sort_unstable();
    let m = sample.members();
    let s1: Vec<usize> = positions.iter().map(|&p| m[p]).collect();
    let mut s2 = Vec::with_capacity(m.len() - s1.len());
    let mut it = positions.iter().peekable();
    for (p, &k) in m.iter().enumerate() {
        if it.peek() == Some(&&p) {
            it.next();
        } else {
            s2.push(k);
        }
    }
    (s1, s2)
}

/// `B = sum_{s2} (1 / pi_2k - 1) e_1k` for one split.
pub fn split_bias(design: &SplitDesign, residuals: &[f64]) -> Result<f64> {
    let p = design.pi2();
    if p <= 0.0 {
        return Err(Error::ZeroTestInclusion("test set".into()));
    }
    Ok((1.0 / p - 1.0) * residuals.iter().sum::<f64>())
}

/// Mean of the per-split bias estimates, `residuals[t]` holding
/// `mu(x_k, s1) - y_k` over the test set of split `t`.
pub fn bias_estimate(design: &SplitDesign, residuals: &[Vec<f64>]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::TooFewSplits { needed: "at least one split", got: 0 });
    }
    let mut total = 0.0;
    for r in residuals {
        total += split_bias(design, r)?;
    }
    Ok(total / residuals.len() as f64)
}

/// HT-type unbiased estimator of `sum_{k,l outside s1} (pi_2kl - pi_2k pi_2l) g_k g_l`
/// from the values `g` observed on `s2`.
fn pair_variance(design: &SplitDesign, g: &[f64]) -> Result<f64> {
    let p = design.pi2();
    let sq: f64 = g.iter().map(|v| v * v).sum();
    let lin: f64 = g.iter().sum();
    let mut v = (1.0 - p) * sq;
    if g.len() >= 2 {
        let pkl = design.pi2_joint();
        if pkl <= 0.0 {
            return Err(Error::NoJointInclusion("test set of size below 2".into()));
        }
        v += (pkl - p * p) / pkl * (lin * lin - sq);
    }
    Ok(v)
}

/// Per-split quantities gathered in one pass.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SplitTerms {
    y_hat1: f64,
    bias: f64,
    var_bias: f64,
    var_test: f64,
}

struct Pass {
    complement: Vec<usize>,
    mu_bar: Vec<f64>,
    observed: f64,
    terms: Vec<SplitTerms>,
    mode: ModeUsed,
}

fn run_splits(
    sample: &Sample,
    design: &SplitDesign,
    spec: &TrainSpec,
    mode: RbMode,
    seed: u64,
    population: &FinitePopulation,
    with_variances: bool,
) -> Result<Pass> {
    if sample.len() != design.sample_size || population.len() != design.population_size {
        return Err(Error::InvalidConfig("split design does not match the sample".into()));
    }
    let observed: f64 = sample.targets(population)?.iter().sum();
    let complement = sample.complement(population.len());
    let mut mu_bar = vec![0.0; complement.len()];
    let mut terms = Vec::new();
    let n1 = design.n1;
    let mut one = |t: usize, s1: &[usize], s2: &[usize]| -> Result<()> {
        let fit = || -> Result<Predictor> {
            let spec_t = spec.clone().with_seed(rng::derive(spec.seed, t as u64));
            Predictor::fit(&spec_t, &Dataset::from_population(population, s1, None)?)
        };
        let mu = fit().map_err(|e| Error::SplitFit { split: t, source: Box::new(e) })?;
        let mut out = 0.0;
        for (acc, &k) in mu_bar.iter_mut().zip(&complement) {
            let v = mu.predict(population.features(k))?;
            *acc += v;
            out += v;
        }
        let mut e = Vec::with_capacity(s2.len());
        for &k in s2 {
            let y = population.target(k).ok_or_else(|| Error::MissingTarget(population.unit(k).id.clone()))?;
            e.push(mu.predict(population.features(k))? - y);
        }
        let bias = split_bias(design, &e)?;
        let (var_bias, var_test) = if with_variances {
            let f = 1.0 / design.pi2() - 1.0;
            let scaled: Vec<f64> = e.iter().map(|v| f * v).collect();
            (pair_variance(design, &scaled)?, pair_variance(design, &e)?)
        } else {
            (0.0, 0.0)
        };
        terms.push(SplitTerms { y_hat1: observed + out, bias, var_bias, var_test });
        Ok(())
    };
    let used = match mode {
        RbMode::MonteCarlo { splits } => {
            if splits == 0 {
                return Err(Error::TooFewSplits { needed: "at least one split", got: 0 });
            }
            for t in 0..splits {
                let (s1, s2) = split(sample, n1, rng::derive(seed, t as u64))?;
                one(t, &s1, &s2)?;
            }
            ModeUsed::MonteCarlo
        }
        RbMode::Exact { cap } => {
            let count = design.split_count();
            if count > cap {
                return Err(Error::EnumerationTooLarge { count, cap });
            }
            for (t, mut pos) in Subsets::new(sample.len(), n1).enumerate() {
                let (s1, s2) = split_at_positions(sample, &mut pos);
                one(t, &s1, &s2)?;
            }
            ModeUsed::ExactRb
        }
    };
    let t = terms.len() as f64;
    mu_bar.iter_mut().for_each(|v| *v /= t);
    Ok(Pass { complement, mu_bar, observed, terms, mode: used })
}

/// Rao-Blackwellised predictions `mu_bar` on `U \ s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrbPredictions {
    pub y_hat: f64,
    /// Population indices outside the sample, ascending.
    pub units: Vec<usize>,
    pub mu_bar: Vec<f64>,
    pub splits_used: usize,
}

/// `sum_s y_k + sum_{U \ s} mu_bar(x_k)`.
pub fn srb_estimator(
    sample: &Sample,
    design: &SplitDesign,
    spec: &TrainSpec,
    mode: RbMode,
    seed: u64,
    population: &FinitePopulation,
) -> Result<SrbPredictions> {
    let pass = run_splits(sample, design, spec, mode, seed, population, false)?;
    Ok(SrbPredictions {
        y_hat: pass.observed + pass.mu_bar.iter().sum::<f64>(),
        units: pass.complement,
        mu_bar: pass.mu_bar,
        splits_used: pass.terms.len(),
    })
}

/// SRB estimate with its bias and MSE estimates, all from the same splits.
pub fn mse_estimate(
    sample: &Sample,
    design: &SplitDesign,
    spec: &TrainSpec,
    mode: RbMode,
    seed: u64,
    population: &FinitePopulation,
) -> Result<UncertaintyReport> {
    if let RbMode::MonteCarlo { splits } = mode {
        if splits < 2 {
            return Err(Error::TooFewSplits { needed: "at least two Monte-Carlo splits", got: splits });
        }
    }
    if design.n2() < 2 {
        return Err(Error::NoJointInclusion("MSE estimation needs a test set of at least two units".into()));
    }
    let pass = run_splits(sample, design, spec, mode, seed, population, true)?;
    let t = pass.terms.len() as f64;
    let mean = |f: fn(&SplitTerms) -> f64| pass.terms.iter().map(f).sum::<f64>() / t;
    let y1: Vec<f64> = pass.terms.iter().map(|s| s.y_hat1).collect();
    let var_q = match pass.mode {
        ModeUsed::MonteCarlo => math::sample_variance(&y1),
        ModeUsed::ExactRb => math::population_variance(&y1),
    }
    .unwrap_or(0.0);
    let components = MseComponents {
        mean_bias_sq: mean(|s| s.bias * s.bias),
        mean_var_bias: mean(|s| s.var_bias),
        mean_var_test: mean(|s| s.var_test),
        var_q,
    };
    Ok(UncertaintyReport {
        y_hat: pass.observed + pass.mu_bar.iter().sum::<f64>(),
        estimator_kind: EstimatorKind::Srb,
        bias_hat: mean(|s| s.bias),
        mse_hat: components.recombine(),
        components,
        splits_used: pass.terms.len(),
        mode: pass.mode,
    })
}

/// One row of the linear-population simulation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub n1: usize,
    pub n2: usize,
    pub mse_pred: f64,
    pub re_pred: f64,
    pub mse_srb: f64,
    pub re_srb: f64,
    /// Coefficient of variation of the MSE estimator across replicates;
    /// undefined for a single replicate.
    pub cv_mse: Option<f64>,
    /// Coefficient of variation of the HT variance estimator across the same samples.
    pub cv_ht_variance: Option<f64>,
    pub mean_mse_hat: f64,
    pub ht_variance: f64,
}

/// Outcome of one simulated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub y_pred: f64,
    pub y_srb: f64,
    pub mse_hat: f64,
    pub ht_variance_hat: f64,
}

/// Fixed ingredients of the linear-population simulation: the population,
/// its total, the sampling design and the (mis-specified) predictor fitting
/// `y` on `x1` alone.
#[derive(Debug, Clone)]
pub struct Table1Plan {
    cfg: SimulationConfig,
    population: FinitePopulation,
    design: SamplingDesign,
    spec: TrainSpec,
    total: f64,
    ht_variance: f64,
}

impl Table1Plan {
    pub fn new(cfg: &SimulationConfig) -> Result<Self> {
        let population = generate_linear_population(cfg, cfg.seed)?;
        Table1Plan::with_population(cfg, population)
    }

    pub fn with_population(cfg: &SimulationConfig, population: FinitePopulation) -> Result<Self> {
        cfg.validate()?;
        let design = SamplingDesign::new(DesignKind::Srswor { n: cfg.sample_size }, &population)?;
        let total = population.total().ok_or_else(|| Error::MissingTarget("population".into()))?;
        let ht_variance = ht_true_variance_of_targets(&design, &population)?;
        Ok(Table1Plan {
            cfg: cfg.clone(),
            population,
            design,
            spec: TrainSpec::ols().with_features(vec![0]),
            total,
            ht_variance,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.cfg
    }

    pub fn population(&self) -> &FinitePopulation {
        &self.population
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn ht_variance(&self) -> f64 {
        self.ht_variance
    }

    pub fn rows(&self) -> usize {
        self.cfg.n2_grid.len()
    }

    /// Replicate `rep` of grid row `row`; independent of every other replicate.
    pub fn replicate(&self, row: usize, rep: usize) -> Result<ReplicateOutcome> {
        let n2 = self.cfg.n2_grid[row];
        let seed = rng::derive(rng::derive(self.cfg.seed, row as u64 + 1), rep as u64);
        let sample = self.design.draw(seed);
        let full = Predictor::fit(&self.spec, &Dataset::from_population(&self.population, sample.members(), None)?)?;
        let y_pred = prediction_estimator(&sample, &full, &self.population)?;
        let split = SplitDesign::new(&self.design, self.cfg.sample_size - n2)?;
        let mode = RbMode::MonteCarlo { splits: self.cfg.splits };
        let report = if self.cfg.splits >= 2 && n2 >= 2 {
            mse_estimate(&sample, &split, &self.spec, mode, rng::derive(seed, 1), &self.population)?
        } else {
            let p = srb_estimator(&sample, &split, &self.spec, mode, rng::derive(seed, 1), &self.population)?;
            UncertaintyReport {
                y_hat: p.y_hat,
                estimator_kind: EstimatorKind::Srb,
                bias_hat: f64::NAN,
                mse_hat: f64::NAN,
                components: MseComponents {
                    mean_bias_sq: f64::NAN,
                    mean_var_bias: f64::NAN,
                    mean_var_test: f64::NAN,
                    var_q: f64::NAN,
                },
                splits_used: p.splits_used,
                mode: ModeUsed::MonteCarlo,
            }
        };
        let y = sample.targets(&self.population)?;
        let _ = ht_total(&sample, &self.population)?;
        let ht_variance_hat = ht_variance_estimate(&self.design, &sample, &y)?;
        Ok(ReplicateOutcome { y_pred, y_srb: report.y_hat, mse_hat: report.mse_hat, ht_variance_hat })
    }

    pub fn summarize(&self, row: usize, outcomes: &[ReplicateOutcome]) -> Table1Row {
        let n2 = self.cfg.n2_grid[row];
        let r = outcomes.len() as f64;
        let mse = |f: fn(&ReplicateOutcome) -> f64| {
            outcomes.iter().map(|o| (f(o) - self.total) * (f(o) - self.total)).sum::<f64>() / r
        };
        let mse_pred = mse(|o| o.y_pred);
        let mse_srb = mse(|o| o.y_srb);
        let mse_hats: Vec<f64> = outcomes.iter().map(|o| o.mse_hat).collect();
        let ht_hats: Vec<f64> = outcomes.iter().map(|o| o.ht_variance_hat).collect();
        let cv = |v: &[f64]| {
            if v.len() < 2 || v.iter().any(|x| x.is_nan()) {
                None
            } else {
                math::coefficient_of_variation(v)
            }
        };
        Table1Row {
            n1: self.cfg.sample_size - n2,
            n2,
            mse_pred,
            re_pred: mse_pred / self.ht_variance,
            mse_srb,
            re_srb: mse_srb / self.ht_variance,
            cv_mse: cv(&mse_hats),
            cv_ht_variance: cv(&ht_hats),
            mean_mse_hat: math::mean(&mse_hats).unwrap_or(f64::NAN),
            ht_variance: self.ht_variance,
        }
    }
}

/// Sequential run of every grid row and replicate.
pub fn run_table1_simulation(cfg: &SimulationConfig) -> Result<Vec<Table1Row>> {
    let plan = Table1Plan::new(cfg)?;
    (0..plan.rows())
        .map(|row| {
            let outcomes = (0..cfg.replicates).map(|rep| plan.replicate(row, rep)).collect::<Result<Vec<_>>>()?;
            Ok(plan.summarize(row, &outcomes))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::popframe::{FeatureSchema, Unit};
    use crate::predictors::ModelKind;

    fn small_population() -> FinitePopulation {
        let x = [1.0, 2.5, 3.0, 4.5, 6.0, 7.0];
        let y = [2.0, 4.0, 7.0, 8.0, 13.0, 12.0];
        let units = (0..6).map(|k| Unit::new(alloc::format!("u{k}"), vec![x[k]], Some(y[k]))).collect();
        FinitePopulation::new(FeatureSchema::continuous(&["x1"]), units).unwrap()
    }

    #[test]
    fn split_sizes() {
        let pop = small_population();
        let d = SamplingDesign::new(DesignKind::Srswor { n: 4 }, &pop).unwrap();
        let s = d.draw(0);
        let (s1, s2) = split(&s, 3, 5).unwrap();
        assert_eq!((s1.len(), s2.len()), (3, 1));
        let mut all = [s1, s2].concat();
        all.sort_unstable();
        assert_eq!(all, s.members());
        assert!(matches!(split(&s, 4, 0), Err(Error::InvalidSplit { .. })));
        assert!(matches!(split(&s, 0, 0), Err(Error::InvalidSplit { .. })));
    }

    #[test]
    fn conditional_probabilities() {
        let d = SplitDesign::from_sizes(1000, 100, 80).unwrap();
        assert_eq!(d.n2(), 20);
        assert!((d.pi2() - 20.0 / 920.0).abs() < 1e-15);
        assert!((d.pi2_joint() - 20.0 * 19.0 / (920.0 * 919.0)).abs() < 1e-15);
    }

    #[test]
    fn census_prediction_is_exact() {
        let pop = small_population();
        let d = SamplingDesign::new(DesignKind::Srswor { n: 6 }, &pop).unwrap();
        let s = d.draw(1);
        let mu =
            Predictor::fit(&TrainSpec::ols(), &Dataset::from_population(&pop, s.members(), None).unwrap()).unwrap();
        assert_eq!(prediction_estimator(&s, &mu, &pop).unwrap(), pop.total().unwrap());
    }

    #[test]
    fn constant_residuals_give_closed_form_bias() {
        let d = SplitDesign::from_sizes(50, 10, 6).unwrap();
        let b = split_bias(&d, &[0.5; 4]).unwrap();
        assert!((b - 4.0 * (1.0 / d.pi2() - 1.0) * 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_split_equals_subsample_estimator() {
        let pop = small_population();
        let d = SamplingDesign::new(DesignKind::Srswor { n: 4 }, &pop).unwrap();
        let s = d.draw(2);
        let sd = SplitDesign::new(&d, 2).unwrap();
        let spec = TrainSpec::ols();
        let p = srb_estimator(&s, &sd, &spec, RbMode::MonteCarlo { splits: 1 }, 9, &pop).unwrap();
        let (s1, _) = split(&s, 2, rng::derive(9, 0)).unwrap();
        let mu = Predictor::fit(&spec, &Dataset::from_population(&pop, &s1, None).unwrap()).unwrap();
        let direct = s.targets(&pop).unwrap().iter().sum::<f64>()
            + s.complement(6).iter().map(|&k| mu.predict(pop.features(k)).unwrap()).sum::<f64>();
        assert!((p.y_hat - direct).abs() < 1e-10);
    }

    #[test]
    fn constant_predictor_ignores_splits() {
        let units = (0..6).map(|k| Unit::new(alloc::format!("u{k}"), vec![1.0], Some(k as f64))).collect();
        let pop = FinitePopulation::new(FeatureSchema::continuous(&["c"]), units).unwrap();
        let d = SamplingDesign::new(DesignKind::Srswor { n: 4 }, &pop).unwrap();
        let s = d.draw(4);
        let sd = SplitDesign::new(&d, 2).unwrap();
        // an intercept-only tree is a constant predictor at the training mean
        let spec = TrainSpec::new(ModelKind::BaggedTrees { n_trees: 1, max_depth: 0, min_leaf: 1 });
        let exact = srb_estimator(&s, &sd, &spec, RbMode::Exact { cap: EXACT_CAP }, 0, &pop).unwrap();
        let ys = s.targets(&pop).unwrap();
        let mean = ys.iter().sum::<f64>() / 4.0;
        assert!((exact.y_hat - (ys.iter().sum::<f64>() + 2.0 * mean)).abs() < 1e-10);
    }

    #[test]
    fn exact_mode_ignores_seed_and_recombines() {
        let pop = small_population();
        let d = SamplingDesign::new(DesignKind::Srswor { n: 5 }, &pop).unwrap();
        let s = d.draw(3);
        let sd = SplitDesign::new(&d, 3).unwrap();
        let a = mse_estimate(&s, &sd, &TrainSpec::ols(), RbMode::Exact { cap: EXACT_CAP }, 1, &pop).unwrap();
        let b = mse_estimate(&s, &sd, &TrainSpec::ols(), RbMode::Exact { cap: EXACT_CAP }, 2, &pop).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.splits_used, 10);
        assert_eq!(a.mse_hat, a.components.recombine());
    }

    #[test]
    fn mse_guards() {
        let pop = small_population();
        let d = SamplingDesign::new(DesignKind::Srswor { n: 4 }, &pop).unwrap();
        let s = d.draw(3);
        let sd = SplitDesign::new(&d, 3).unwrap();
        assert!(mse_estimate(&s, &sd, &TrainSpec::ols(), RbMode::Exact { cap: EXACT_CAP }, 0, &pop).is_err());
        let sd = SplitDesign::new(&d, 2).unwrap();
        assert!(matches!(
            mse_estimate(&s, &sd, &TrainSpec::ols(), RbMode::MonteCarlo { splits: 1 }, 0, &pop),
            Err(Error::TooFewSplits { .. })
        ));
        assert!(matches!(
            mse_estimate(&s, &sd, &TrainSpec::ols(), RbMode::Exact { cap: 5 }, 0, &pop),
            Err(Error::EnumerationTooLarge { count: 6, cap: 5 })
        ));
        let b = SamplingDesign::new(DesignKind::Bernoulli { p: 0.5 }, &pop).unwrap();
        assert!(matches!(SplitDesign::new(&b, 2), Err(Error::UnsupportedDesign(_))));
    }

    #[test]
    fn split_fit_failure_names_the_split() {
        // two identical x values make the OLS design singular on some splits
        let units = (0..6)
            .map(|k| Unit::new(alloc::format!("u{k}"), vec![if k < 3 { 1.0 } else { 2.0 }], Some(k as f64)))
            .collect();
        let pop = FinitePopulation::new(FeatureSchema::continuous(&["x"]), units).unwrap();
        let d = SamplingDesign::new(DesignKind::Srswor { n: 6 }, &pop).unwrap();
        let s = d.draw(0);
        let sd = SplitDesign::new(&d, 2).unwrap();
        let err = srb_estimator(&s, &sd, &TrainSpec::ols(), RbMode::Exact { cap: EXACT_CAP }, 0, &pop).unwrap_err();
        assert!(matches!(err, Error::SplitFit { split: 0, .. }));
    }
}
