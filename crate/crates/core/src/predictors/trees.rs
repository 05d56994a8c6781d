use super::{Dataset, Task};
use crate::rng;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub(super) struct Params {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
enum Node {
    Leaf { value: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A CART tree; leaves hold the weighted mean (regression) or the weighted
/// class frequencies (probability mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(super) fn leaf(&self, x: impl Fn(usize) -> f64) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// One tree per bootstrap replicate; a single tree is grown on the data as given.
pub(super) fn fit_bagged(data: &Dataset, n_trees: usize, params: &Params, seed: u64) -> Vec<Tree> {
    let n = data.len();
    let base: Vec<f64> = (0..n).map(|i| data.weight(i)).collect();
    (0..n_trees)
        .map(|t| {
            let w = if n_trees == 1 {
                base.clone()
            } else {
                let mut r = rng::stream(rng::derive(seed, t as u64), 0);
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[r.random_range(0..n)] += 1;
                }
                counts.iter().zip(&base).map(|(&c, &w)| c as f64 * w).collect()
            };
            grow(data, &w, params)
        })
        .collect()
}

struct Builder<'a> {
    data: &'a Dataset,
    w: &'a [f64],
    params: &'a Params,
    nodes: Vec<Node>,
}

fn grow(data: &Dataset, w: &[f64], params: &Params) -> Tree {
    let rows: Vec<usize> = (0..data.len()).filter(|&i| w[i] > 0.0).collect();
    let mut b = Builder { data, w, params, nodes: Vec::new() };
    b.node(rows, 0);
    Tree { nodes: b.nodes }
}

impl Builder<'_> {
    fn node(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.leaf_value(&rows) });
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.data.row(i)[feature] <= threshold);
        let left = self.node(l, depth + 1);
        let right = self.node(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    fn leaf_value(&self, rows: &[usize]) -> Vec<f64> {
        let y = self.data.targets();
        match self.params.task {
            Task::Regression => {
                let (mut s, mut sw) = (0.0, 0.0);
                for &i in rows {
                    s += self.w[i] * y[i];
                    sw += self.w[i];
                }
                vec![if sw > 0.0 { s / sw } else { 0.0 }]
            }
            Task::Probability { n_classes } => {
                let mut p = vec![0.0; n_classes];
                let mut sw = 0.0;
                for &i in rows {
                    p[y[i] as usize] += self.w[i];
                    sw += self.w[i];
                }
                if sw > 0.0 {
                    p.iter_mut().for_each(|v| *v /= sw);
                } else {
                    p.fill(1.0 / n_classes as f64);
                }
                p
            }
        }
    }

    /// Impurity statistics accumulate in `acc`: `[sum w, sum w y, sum w y^2]`
    /// for regression, `[sum w, w_class0, w_class1, ...]` for classes.
    fn stats_len(&self) -> usize {
        match self.params.task {
            Task::Regression => 3,
            Task::Probability { n_classes } => 1 + n_classes,
        }
    }

    fn add(&self, acc: &mut [f64], i: usize, sign: f64) {
        let w = sign * self.w[i];
        let y = self.data.targets()[i];
        acc[0] += w;
        match self.params.task {
            Task::Regression => {
                acc[1] += w * y;
                acc[2] += w * y * y;
            }
            Task::Probability { .. } => acc[1 + y as usize] += w,
        }
    }

    /// Total weighted impurity (weighted SSE or weight times Gini index).
    fn impurity(&self, acc: &[f64]) -> f64 {
        if acc[0] <= 0.0 {
            return 0.0;
        }
        match self.params.task {
            Task::Regression => (acc[2] - acc[1] * acc[1] / acc[0]).max(0.0),
            Task::Probability { .. } => (acc[0] - acc[1..].iter().map(|c| c * c).sum::<f64>() / acc[0]).max(0.0),
        }
    }

    /// Best split by impurity decrease; earlier features and lower thresholds win ties.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let m = self.stats_len();
        let mut total = vec![0.0; m];
        for &i in rows {
            self.add(&mut total, i, 1.0);
        }
        let parent = self.impurity(&total);
        let tol = 1e-12 * parent.max(f64::MIN_POSITIVE);
        if parent <= 0.0 {
            return None;
        }
        let min_leaf = self.params.min_leaf;
        let mut best: Option<(usize, f64)> = None;
        let mut best_gain = tol;
        let mut order = rows.to_vec();
        let mut left = vec![0.0; m];
        let mut right = vec![0.0; m];
        for j in 0..self.data.n_features() {
            let v = |i: usize| self.data.row(i)[j];
            order.sort_by(|&a, &b| v(a).total_cmp(&v(b)).then(a.cmp(&b)));
            left.fill(0.0);
            right.copy_from_slice(&total);
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                self.add(&mut left, i, 1.0);
                self.add(&mut right, i, -1.0);
                let (a, b) = (v(i), v(order[pos + 1]));
                if a == b || pos + 1 < min_leaf || order.len() - pos - 1 < min_leaf {
                    continue;
                }
                if left[0] <= 0.0 || right[0] <= 0.0 {
                    continue;
                }
                let gain = parent - self.impurity(&left) - self.impurity(&right);
                if gain > best_gain + tol {
                    best_gain = gain;
                    best = Some((j, a + (b - a) / 2.0));
                }
            }
        }
        best
    }
}
