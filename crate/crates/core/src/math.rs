//! Float helpers and summary statistics usable without `std`.

use alloc::vec::Vec;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

pub fn is_integer(x: f64) -> bool {
    libm::trunc(x) == x
}

pub fn sum(values: &[f64]) -> f64 {
    values.iter().sum()
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(sum(values) / values.len() as f64)
    }
}

/// Sample variance with divisor `n - 1` (two-pass).
pub fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some(ss / (values.len() - 1) as f64)
}

/// Population variance with divisor `n`.
pub fn population_variance(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some(ss / values.len() as f64)
}

pub fn sample_sd(values: &[f64]) -> Option<f64> {
    sample_variance(values).map(sqrt)
}

/// Coefficient of variation `sd / mean` with the `n - 1` divisor.
pub fn coefficient_of_variation(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let sd = sample_sd(values)?;
    if m == 0.0 {
        None
    } else {
        Some(sd / m.abs())
    }
}

/// 1-based nearest rank `ceil(p * n)`, clamped to `1..=n`.
///
/// Products within 1e-9 of an integer are snapped to it so that e.g.
/// `0.95 * 20` resolves to rank 19 regardless of representation error.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    let raw = p * n as f64;
    let snapped = round(raw);
    let rank = if (raw - snapped).abs() < 1e-9 { snapped } else { ceil(raw) };
    (rank as usize).clamp(1, n.max(1))
}

/// Nearest-rank (type 1) quantile of unsorted values.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[nearest_rank(p, sorted.len()) - 1])
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Weighted nearest-rank quantile: the smallest value whose cumulative
/// weight reaches `p` times the total weight.
pub fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let target = p * total;
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i];
        if cum >= target - 1e-12 * total {
            return Some(values[i]);
        }
    }
    order.last().map(|&i| values[i])
}

/// Slope of the least-squares line through the origin.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> Option<f64> {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 || x.len() != y.len() {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Some(sxy / sxx)
}
