//! Finite populations and the linear simulation population.

use crate::math::population_variance;
use crate::rng;
use crate::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    /// Dictionary-coded: the stored value is an index into `labels`.
    Categorical {
        labels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn continuous(name: &str) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Continuous }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn continuous(names: &[&str]) -> Self {
        FeatureSchema { features: names.iter().map(|n| FeatureSpec::continuous(n)).collect() }
    }

    pub fn arity(&self) -> usize {
        self.features.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub x: Vec<f64>,
    pub y: Option<f64>,
    #[serde(default)]
    pub domains: BTreeMap<String, String>,
    #[serde(default)]
    pub admin_value: Option<f64>,
}

impl Unit {
    pub fn new(id: impl Into<String>, x: Vec<f64>, y: Option<f64>) -> Self {
        Unit { id: id.into(), x, y, domains: BTreeMap::new(), admin_value: None }
    }

    pub fn with_domain(mut self, scheme: &str, label: &str) -> Self {
        self.domains.insert(scheme.into(), label.into());
        self
    }
}

/// An ordered, immutable collection of units sharing one feature schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePopulation {
    schema: FeatureSchema,
    units: Vec<Unit>,
    index: BTreeMap<String, usize>,
}

impl FinitePopulation {
    pub fn new(schema: FeatureSchema, units: Vec<Unit>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::Empty("population has no units"));
        }
        let arity = schema.arity();
        let mut index = BTreeMap::new();
        let schemes: Vec<&String> = units[0].domains.keys().collect();
        for (i, unit) in units.iter().enumerate() {
            if index.insert(unit.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(unit.id.clone()));
            }
            if unit.x.len() != arity {
                return Err(Error::ArityMismatch { id: unit.id.clone(), expected: arity, found: unit.x.len() });
            }
            if !unit.domains.keys().eq(schemes.iter().copied()) {
                return Err(Error::DomainSchemeMismatch(unit.id.clone()));
            }
            for (value, spec) in unit.x.iter().zip(&schema.features) {
                if let FeatureKind::Categorical { labels } = &spec.kind {
                    let ok = *value >= 0.0 && crate::math::is_integer(*value) && (*value as usize) < labels.len();
                    if !ok {
                        return Err(Error::InvalidConfig(format!(
                            "unit `{}`: code {} is not a label of categorical feature `{}`",
                            unit.id, value, spec.name
                        )));
                    }
                }
            }
        }
        Ok(FinitePopulation { schema, units, index })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, k: usize) -> &Unit {
        &self.units[k]
    }

    pub fn features(&self, k: usize) -> &[f64] {
        &self.units[k].x
    }

    pub fn target(&self, k: usize) -> Option<f64> {
        self.units[k].y
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Population total `Y`, if every unit has an observed target.
    pub fn total(&self) -> Option<f64> {
        self.units.iter().map(|u| u.y).sum()
    }

    pub fn domain_schemes(&self) -> Vec<&str> {
        self.units[0].domains.keys().map(String::as_str).collect()
    }

    pub fn into_units(self) -> Vec<Unit> {
        self.units
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub population_size: usize,
    pub sample_size: usize,
    #[serde(default = "one")]
    pub beta1: f64,
    #[serde(default = "one")]
    pub beta2: f64,
    /// Multiplier on the noise standard deviation `sigma / 2`.
    #[serde(default = "one")]
    pub noise_scale: f64,
    pub splits: usize,
    pub replicates: usize,
    pub n2_grid: Vec<usize>,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SimulationConfig {
    /// Population and sample sizes of the published linear example with unit slopes.
    pub fn linear_example(seed: u64) -> Self {
        SimulationConfig {
            population_size: 1000,
            sample_size: 100,
            beta1: 1.0,
            beta2: 1.0,
            noise_scale: 1.0,
            splits: 1000,
            replicates: 250,
            n2_grid: alloc::vec![2, 20, 30],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.population_size == 0 || self.sample_size == 0 {
            return bad("population and sample sizes must be positive".into());
        }
        if self.sample_size > self.population_size {
            return Err(Error::SampleTooLarge { n: self.sample_size, population: self.population_size });
        }
        if self.splits == 0 || self.replicates == 0 {
            return bad("splits and replicates must be positive".into());
        }
        if self.noise_scale.is_nan() || self.noise_scale < 0.0 {
            return bad("noise_scale must be non-negative".into());
        }
        for &n2 in &self.n2_grid {
            if n2 == 0 || n2 >= self.sample_size {
                return bad(format!("test-set size {n2} must satisfy 1 <= n2 < n = {}", self.sample_size));
            }
        }
        Ok(())
    }
}

/// `y = beta1 x1 + beta2 x2 + e` with `x1 ~ LogN(1, 1)`, `x2 ~ Poisson(5)` and
/// `e ~ N(0, sigma^2 / 4)`, `sigma^2` being the realised population variance
/// (divisor `N`) of `x1`.
pub fn generate_linear_population(cfg: &SimulationConfig, seed: u64) -> Result<FinitePopulation> {
    cfg.validate()?;
    let n = cfg.population_size;
    let mut rng = rng::stream(seed, 0);
    let lognormal = LogNormal::new(1.0, 1.0).expect("valid lognormal");
    let poisson = Poisson::new(5.0).expect("valid poisson");
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    for _ in 0..n {
        x1.push(lognormal.sample(&mut rng));
        x2.push(poisson.sample(&mut rng));
    }
    let sigma2 = population_variance(&x1).unwrap_or(0.0);
    let sd = cfg.noise_scale * crate::math::sqrt(sigma2) / 2.0;
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let width = digits(n);
    let units = (0..n)
        .map(|k| {
            let eps = if sd == 0.0 { 0.0 } else { sd * noise.sample(&mut rng) };
            let y = cfg.beta1 * x1[k] + cfg.beta2 * x2[k] + eps;
            Unit::new(format!("u{:0width$}", k, width = width), alloc::vec![x1[k], x2[k]], Some(y))
        })
        .collect();
    FinitePopulation::new(FeatureSchema::continuous(&["x1", "x2"]), units)
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_duplicates_and_arity() {
        let schema = FeatureSchema::continuous(&["a"]);
        let dup = vec![Unit::new("a", vec![1.0], None), Unit::new("a", vec![2.0], None)];
        assert_eq!(FinitePopulation::new(schema.clone(), dup), Err(Error::DuplicateId("a".into())));
        let arity = vec![Unit::new("a", vec![1.0], None), Unit::new("b", vec![], None)];
        assert!(matches!(FinitePopulation::new(schema, arity), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn domain_schemes_must_agree() {
        let schema = FeatureSchema::continuous(&[]);
        let units = vec![Unit::new("a", vec![], None).with_domain("region", "N"), Unit::new("b", vec![], None)];
        assert_eq!(FinitePopulation::new(schema, units), Err(Error::DomainSchemeMismatch("b".into())));
    }

    #[test]
    fn categorical_codes_checked() {
        let schema = FeatureSchema {
            features: vec![FeatureSpec {
                name: "sector".into(),
                kind: FeatureKind::Categorical { labels: vec!["A".into(), "B".into()] },
            }],
        };
        assert!(FinitePopulation::new(schema.clone(), vec![Unit::new("a", vec![1.0], None)]).is_ok());
        assert!(FinitePopulation::new(schema, vec![Unit::new("a", vec![2.0], None)]).is_err());
    }

    #[test]
    fn generation_is_reproducible() {
        let cfg = SimulationConfig {
            population_size: 50,
            sample_size: 10,
            n2_grid: vec![2],
            ..SimulationConfig::linear_example(3)
        };
        let a = generate_linear_population(&cfg, 11).unwrap();
        let b = generate_linear_population(&cfg, 11).unwrap();
        let c = generate_linear_population(&cfg, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 50);
    }

    #[test]
    fn zero_slopes_and_noise_give_zero_targets() {
        let cfg = SimulationConfig {
            population_size: 200,
            beta1: 0.0,
            beta2: 0.0,
            noise_scale: 0.0,
            ..SimulationConfig::linear_example(1)
        };
        let pop = generate_linear_population(&cfg, 5).unwrap();
        assert!(pop.units().iter().all(|u| u.y == Some(0.0)));
        assert_eq!(pop.total(), Some(0.0));
    }

    #[test]
    fn x1_variance_matches_lognormal_moments() {
        // Monte-Carlo oracle: the LogN(1, 1) variance is (e - 1) e^3
        let cfg = SimulationConfig { population_size: 1_000_000, ..SimulationConfig::linear_example(0) };
        let pop = generate_linear_population(&cfg, 99).unwrap();
        let x1: Vec<f64> = (0..pop.len()).map(|k| pop.features(k)[0]).collect();
        let v = population_variance(&x1).unwrap();
        let e = core::f64::consts::E;
        let truth = (e - 1.0) * e * e * e;
        assert!((v / truth - 1.0).abs() < 0.1, "{v} vs {truth}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimulationConfig::linear_example(0);
        assert!(cfg.validate().is_ok());
        cfg.n2_grid = vec![100];
        assert!(cfg.validate().is_err());
        cfg.n2_grid = vec![20];
        cfg.sample_size = 2000;
        assert!(matches!(cfg.validate(), Err(Error::SampleTooLarge { .. })));
    }
}
