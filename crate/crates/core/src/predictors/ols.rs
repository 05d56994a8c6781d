use super::Dataset;
use crate::linalg::weighted_least_squares;
use crate::Result;
use alloc::vec::Vec;

/// Coefficients, intercept first when requested.
pub(super) fn fit(data: &Dataset, intercept: bool) -> Result<Vec<f64>> {
    let p = data.n_features() + usize::from(intercept);
    let mut m = Vec::with_capacity(data.len() * p);
    for i in 0..data.len() {
        if intercept {
            m.push(1.0);
        }
        m.extend_from_slice(data.row(i));
    }
    let beta = weighted_least_squares(&m, p, data.targets(), data.weights())?;
    Ok(if intercept { beta } else { core::iter::once(0.0).chain(beta).collect() })
}

pub(super) fn predict(coefficients: &[f64], x: impl Fn(usize) -> f64) -> f64 {
    coefficients[0] + coefficients[1..].iter().enumerate().map(|(j, b)| b * x(j)).sum::<f64>()
}
