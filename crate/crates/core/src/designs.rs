//! Probability sampling designs and Horvitz-Thompson estimation.

use crate::combinatorics::Subsets;
use crate::popframe::FinitePopulation;
use crate::rng;
use crate::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignKind {
    Srswor {
        n: usize,
    },
    /// SRSWOR within the strata given by a domain scheme.
    StratifiedSrswor {
        scheme: String,
        allocation: BTreeMap<String, usize>,
    },
    /// Deterministic inclusion of every unit whose `variable` is at least `threshold`.
    #[serde(rename = "cutoff")]
    CutOff {
        variable: String,
        threshold: f64,
    },
    Bernoulli {
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Stratum {
    members: Vec<usize>,
    n: usize,
}

/// A design bound to a concrete population, with its first-order
/// inclusion probabilities precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDesign {
    kind: DesignKind,
    pi: Vec<f64>,
    strata: Vec<Stratum>,
    stratum_of: Vec<usize>,
}

impl SamplingDesign {
    pub fn new(kind: DesignKind, population: &FinitePopulation) -> Result<Self> {
        let big_n = population.len();
        let mut pi = vec![0.0; big_n];
        let mut strata = Vec::new();
        let mut stratum_of = vec![0; big_n];
        match &kind {
            DesignKind::Srswor { n } => {
                if *n > big_n {
                    return Err(Error::SampleTooLarge { n: *n, population: big_n });
                }
                if *n == 0 {
                    return Err(Error::InvalidConfig("sample size must be positive".into()));
                }
                pi.fill(*n as f64 / big_n as f64);
                strata.push(Stratum { members: (0..big_n).collect(), n: *n });
            }
            DesignKind::StratifiedSrswor { scheme, allocation } => {
                let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
                for (k, unit) in population.units().iter().enumerate() {
                    let label = unit
                        .domains
                        .get(scheme)
                        .ok_or_else(|| Error::InvalidConfig(format!("unit `{}` has no `{scheme}` label", unit.id)))?;
                    by_label.entry(label.as_str()).or_default().push(k);
                }
                for (label, members) in by_label {
                    let n_h = *allocation
                        .get(label)
                        .ok_or_else(|| Error::InvalidConfig(format!("no allocation for stratum `{label}`")))?;
                    if n_h > members.len() {
                        return Err(Error::SampleTooLarge { n: n_h, population: members.len() });
                    }
                    let p = n_h as f64 / members.len() as f64;
                    for &k in &members {
                        pi[k] = p;
                        stratum_of[k] = strata.len();
                    }
                    strata.push(Stratum { members, n: n_h });
                }
            }
            DesignKind::CutOff { variable, threshold } => {
                let j =
                    population.schema().index_of(variable).ok_or_else(|| Error::UnknownVariable(variable.clone()))?;
                for (k, p) in pi.iter_mut().enumerate() {
                    if population.features(k)[j] >= *threshold {
                        *p = 1.0;
                    }
                }
            }
            DesignKind::Bernoulli { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(Error::InvalidConfig(format!("Bernoulli probability {p} outside (0, 1]")));
                }
                pi.fill(*p);
            }
        }
        Ok(SamplingDesign { kind, pi, strata, stratum_of })
    }

    pub fn kind(&self) -> &DesignKind {
        &self.kind
    }

    pub fn population_size(&self) -> usize {
        self.pi.len()
    }

    pub fn inclusion(&self, k: usize) -> f64 {
        self.pi[k]
    }

    pub fn inclusions(&self) -> &[f64] {
        &self.pi
    }

    /// Units with zero inclusion probability are outside the probabilistic part.
    pub fn is_probabilistic(&self, k: usize) -> bool {
        self.pi[k] > 0.0
    }

    /// Second-order inclusion probability; `k == l` gives `pi_k`.
    pub fn joint_inclusion(&self, k: usize, l: usize) -> f64 {
        if k == l {
            return self.pi[k];
        }
        match &self.kind {
            DesignKind::Srswor { .. } | DesignKind::StratifiedSrswor { .. } => {
                let h = self.stratum_of[k];
                if h != self.stratum_of[l] {
                    return self.pi[k] * self.pi[l];
                }
                let s = &self.strata[h];
                let (n, big_n) = (s.n as f64, s.members.len() as f64);
                if s.members.len() < 2 {
                    0.0
                } else {
                    n * (n - 1.0) / (big_n * (big_n - 1.0))
                }
            }
            DesignKind::CutOff { .. } | DesignKind::Bernoulli { .. } => self.pi[k] * self.pi[l],
        }
    }

    pub fn draw(&self, seed: u64) -> Sample {
        let mut rng = rng::stream(seed, 0);
        let mut members = match &self.kind {
            DesignKind::Srswor { .. } | DesignKind::StratifiedSrswor { .. } => {
                let mut out = Vec::new();
                for s in &self.strata {
                    let mut pool = s.members.clone();
                    partial_shuffle(&mut pool, s.n, &mut rng);
                    out.extend_from_slice(&pool[..s.n]);
                }
                out
            }
            DesignKind::CutOff { .. } => (0..self.pi.len()).filter(|&k| self.pi[k] == 1.0).collect(),
            DesignKind::Bernoulli { p } => (0..self.pi.len()).filter(|_| rng.random::<f64>() < *p).collect(),
        };
        members.sort_unstable();
        let pi = members.iter().map(|&k| self.pi[k]).collect();
        Sample { members, pi }
    }

    /// Builds the sample made of the given (sorted, distinct) population indices.
    pub fn sample_of(&self, members: Vec<usize>) -> Result<Sample> {
        for w in members.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidConfig("sample members must be sorted and distinct".into()));
            }
        }
        if let Some(&k) = members.last() {
            if k >= self.pi.len() {
                return Err(Error::InvalidConfig(format!("unit index {k} outside the population")));
            }
        }
        let pi = members.iter().map(|&k| self.pi[k]).collect();
        Ok(Sample { members, pi })
    }

    /// Every possible sample with its selection probability.
    ///
    /// Intended for exhaustive checks on small populations; refuses designs
    /// with more than `cap` support points.
    pub fn support(&self, cap: u128) -> Result<Vec<(Sample, f64)>> {
        let count = self.support_size();
        if count > cap {
            return Err(Error::EnumerationTooLarge { count, cap });
        }
        let mut out = Vec::new();
        match &self.kind {
            DesignKind::Srswor { .. } | DesignKind::StratifiedSrswor { .. } => {
                let per_stratum: Vec<Vec<Vec<usize>>> = self
                    .strata
                    .iter()
                    .map(|s| {
                        Subsets::new(s.members.len(), s.n)
                            .map(|idx| idx.iter().map(|&i| s.members[i]).collect())
                            .collect()
                    })
                    .collect();
                let prob = 1.0 / count as f64;
                let mut cursor = vec![0usize; per_stratum.len()];
                loop {
                    let mut members: Vec<usize> =
                        cursor.iter().enumerate().flat_map(|(h, &c)| per_stratum[h][c].iter().copied()).collect();
                    members.sort_unstable();
                    out.push((self.sample_of(members)?, prob));
                    // odometer increment
                    let mut h = per_stratum.len();
                    loop {
                        if h == 0 {
                            return Ok(out);
                        }
                        h -= 1;
                        cursor[h] += 1;
                        if cursor[h] < per_stratum[h].len() {
                            break;
                        }
                        cursor[h] = 0;
                    }
                }
            }
            DesignKind::CutOff { .. } => out.push((self.draw(0), 1.0)),
            DesignKind::Bernoulli { p } => {
                let big_n = self.pi.len();
                for mask in 0u64..(1u64 << big_n) {
                    let members: Vec<usize> = (0..big_n).filter(|k| mask >> k & 1 == 1).collect();
                    let m = members.len() as i32;
                    let prob = libm::pow(*p, m as f64) * libm::pow(1.0 - p, (big_n as i32 - m) as f64);
                    out.push((self.sample_of(members)?, prob));
                }
            }
        }
        Ok(out)
    }

    fn support_size(&self) -> u128 {
        match &self.kind {
            DesignKind::Srswor { .. } | DesignKind::StratifiedSrswor { .. } => self
                .strata
                .iter()
                .map(|s| crate::combinatorics::binomial(s.members.len(), s.n))
                .fold(1u128, |a, b| a.saturating_mul(b)),
            DesignKind::CutOff { .. } => 1,
            DesignKind::Bernoulli { .. } => {
                if self.pi.len() >= 64 {
                    u128::MAX
                } else {
                    1u128 << self.pi.len()
                }
            }
        }
    }
}

fn partial_shuffle<R: Rng>(pool: &mut [usize], n: usize, rng: &mut R) {
    let len = pool.len();
    for i in 0..n.min(len) {
        let j = rng.random_range(i..len);
        pool.swap(i, j);
    }
}

/// A realised sample: population indices in ascending order together with
/// their first-order inclusion probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    members: Vec<usize>,
    pi: Vec<f64>,
}

impl Sample {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn inclusions(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Design weights `d_k = 1 / pi_k`.
    pub fn weights(&self) -> Vec<f64> {
        self.pi.iter().map(|p| 1.0 / p).collect()
    }

    pub fn ids<'a>(&self, population: &'a FinitePopulation) -> Vec<&'a str> {
        self.members.iter().map(|&k| population.unit(k).id.as_str()).collect()
    }

    /// Observed targets of the members, failing on the first missing one.
    pub fn targets(&self, population: &FinitePopulation) -> Result<Vec<f64>> {
        self.members
            .iter()
            .map(|&k| population.target(k).ok_or_else(|| Error::MissingTarget(population.unit(k).id.clone())))
            .collect()
    }

    /// Population indices not in the sample, ascending.
    pub fn complement(&self, population_size: usize) -> Vec<usize> {
        crate::combinatorics::complement(&self.members, population_size)
    }
}

/// `sum_s y_k / pi_k` over the sample's observed targets.
pub fn ht_total(sample: &Sample, population: &FinitePopulation) -> Result<f64> {
    let y = sample.targets(population)?;
    ht_total_values(sample, &y).map_err(|e| match e {
        Error::ZeroInclusion(i) => {
            Error::ZeroInclusion(population.unit(sample.members[i.parse::<usize>().unwrap_or(0)]).id.clone())
        }
        e => e,
    })
}

/// HT total of values aligned with the sample members.
pub fn ht_total_values(sample: &Sample, values: &[f64]) -> Result<f64> {
    check_aligned(sample, values)?;
    let mut total = 0.0;
    for (i, (&y, &p)) in values.iter().zip(&sample.pi).enumerate() {
        if p <= 0.0 {
            return Err(Error::ZeroInclusion(format!("{i}")));
        }
        total += y / p;
    }
    Ok(total)
}

fn check_aligned(sample: &Sample, values: &[f64]) -> Result<()> {
    if values.len() != sample.len() {
        return Err(Error::SchemaMismatch { expected: sample.len(), found: values.len() });
    }
    Ok(())
}

/// Unbiased HT variance estimator
/// `sum_k sum_l (pi_kl - pi_k pi_l) / pi_kl * (y_k / pi_k)(y_l / pi_l)` over the sample,
/// in closed form per stratum.
pub fn ht_variance_estimate(design: &SamplingDesign, sample: &Sample, values: &[f64]) -> Result<f64> {
    check_aligned(sample, values)?;
    if sample.pi.iter().any(|&p| p <= 0.0) {
        return Err(Error::ZeroInclusion("sample member".into()));
    }
    match design.kind() {
        DesignKind::CutOff { .. } => Ok(0.0),
        DesignKind::Bernoulli { p } => Ok(values.iter().map(|y| (1.0 - p) * (y / p) * (y / p)).sum()),
        DesignKind::Srswor { .. } | DesignKind::StratifiedSrswor { .. } => {
            let mut sums = vec![(0.0, 0.0); design.strata.len()];
            for (&k, &y) in sample.members.iter().zip(values) {
                let e = y / design.pi[k];
                let slot = &mut sums[design.stratum_of[k]];
                slot.0 += e;
                slot.1 += e * e;
            }
            let mut v = 0.0;
            for (h, s) in design.strata.iter().enumerate() {
                let (lin, sq) = sums[h];
                let big_n = s.members.len();
                if s.n == 0 {
                    continue;
                }
                if s.n == 1 && big_n > 1 {
                    return Err(Error::NoJointInclusion(format!(
                        "stratum with one sampled unit out of {big_n} has pi_kl = 0"
                    )));
                }
                let p = s.n as f64 / big_n as f64;
                v += (1.0 - p) * sq;
                if s.n >= 2 {
                    let pkl = design.joint_inclusion(s.members[0], s.members[1]);
                    v += (pkl - p * p) / pkl * (lin * lin - sq);
                }
            }
            Ok(v)
        }
    }
}

/// The same estimator by explicit double sum over sample pairs.
pub fn ht_variance_estimate_pairwise(design: &SamplingDesign, sample: &Sample, values: &[f64]) -> Result<f64> {
    check_aligned(sample, values)?;
    let m = &sample.members;
    let mut v = 0.0;
    for i in 0..m.len() {
        for j in 0..m.len() {
            let pkl = design.joint_inclusion(m[i], m[j]);
            if pkl <= 0.0 {
                return Err(Error::NoJointInclusion(format!("units {} and {} never co-occur", m[i], m[j])));
            }
            let (pk, pl) = (design.pi[m[i]], design.pi[m[j]]);
            v += (pkl - pk * pl) / pkl * (values[i] / pk) * (values[j] / pl);
        }
    }
    Ok(v)
}

/// Design variance of the HT total, `sum_U sum_U (pi_kl - pi_k pi_l)(y_k / pi_k)(y_l / pi_l)`.
///
/// Units with `pi_k = 0` contribute nothing (they never enter the estimator).
pub fn ht_true_variance(design: &SamplingDesign, values: &[f64]) -> Result<f64> {
    if values.len() != design.population_size() {
        return Err(Error::SchemaMismatch { expected: design.population_size(), found: values.len() });
    }
    match design.kind() {
        DesignKind::CutOff { .. } => Ok(0.0),
        DesignKind::Bernoulli { p } => Ok(values.iter().map(|y| (p - p * p) * (y / p) * (y / p)).sum()),
        DesignKind::Srswor { .. } | DesignKind::StratifiedSrswor { .. } => {
            let mut v = 0.0;
            for s in &design.strata {
                if s.n == 0 {
                    continue;
                }
                let p = s.n as f64 / s.members.len() as f64;
                let (mut lin, mut sq) = (0.0, 0.0);
                for &k in &s.members {
                    let e = values[k] / p;
                    lin += e;
                    sq += e * e;
                }
                v += (p - p * p) * sq;
                if s.members.len() >= 2 {
                    let pkl = design.joint_inclusion(s.members[0], s.members[1]);
                    v += (pkl - p * p) * (lin * lin - sq);
                }
            }
            Ok(v)
        }
    }
}

/// Convenience wrapper using the population targets.
pub fn ht_true_variance_of_targets(design: &SamplingDesign, population: &FinitePopulation) -> Result<f64> {
    let y: Vec<f64> = (0..population.len())
        .map(|k| population.target(k).ok_or_else(|| Error::MissingTarget(population.unit(k).id.clone())))
        .collect::<Result<_>>()?;
    ht_true_variance(design, &y)
}
