use super::Dataset;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(super) struct Knn {
    k: usize,
    n_features: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    w: Option<Vec<f64>>,
}

impl Knn {
    pub(super) fn fit(data: &Dataset, k: usize) -> Self {
        Knn {
            k: k.min(data.len()),
            n_features: data.n_features(),
            x: data.x.clone(),
            y: data.y.clone(),
            w: data.weights.clone(),
        }
    }

    /// Indices of the k nearest training rows (Euclidean, ties to the lower index).
    fn neighbours(&self, x: &impl Fn(usize) -> f64) -> Vec<usize> {
        let p = self.n_features;
        let mut d: Vec<(f64, usize)> = (0..self.y.len())
            .map(|i| {
                let row = &self.x[i * p..(i + 1) * p];
                (row.iter().enumerate().map(|(j, v)| (v - x(j)) * (v - x(j))).sum(), i)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(self.k);
        d.into_iter().map(|(_, i)| i).collect()
    }

    fn weight(&self, i: usize) -> f64 {
        self.w.as_ref().map_or(1.0, |w| w[i])
    }

    pub(super) fn regress(&self, x: impl Fn(usize) -> f64) -> f64 {
        let nb = self.neighbours(&x);
        let (mut num, mut den) = (0.0, 0.0);
        for &i in &nb {
            num += self.weight(i) * self.y[i];
            den += self.weight(i);
        }
        if den > 0.0 {
            num / den
        } else {
            nb.iter().map(|&i| self.y[i]).sum::<f64>() / nb.len() as f64
        }
    }

    pub(super) fn proba(&self, x: impl Fn(usize) -> f64, n_classes: usize) -> Vec<f64> {
        let nb = self.neighbours(&x);
        let mut p = vec![0.0; n_classes];
        let mut total = 0.0;
        for &i in &nb {
            p[self.y[i] as usize] += self.weight(i);
            total += self.weight(i);
        }
        if total > 0.0 {
            p.iter_mut().for_each(|v| *v /= total);
        } else {
            p.fill(1.0 / n_classes as f64);
        }
        p
    }
}
