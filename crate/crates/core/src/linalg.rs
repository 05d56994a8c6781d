//! Dense weighted least squares through Householder QR.

use crate::math::sqrt;
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

/// Relative threshold on `|R_jj|` (against the largest column norm) below
/// which a column is treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Solves `min sum_i w_i (y_i - x_i' b)^2` for a row-major `rows x cols` matrix.
pub fn weighted_least_squares(matrix: &[f64], cols: usize, y: &[f64], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let rows = y.len();
    if rows == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    debug_assert_eq!(matrix.len(), rows * cols);
    // column-major copy, scaled by sqrt(w)
    let mut a = vec![0.0; rows * cols];
    let mut b = vec![0.0; rows];
    for i in 0..rows {
        let s = match weights {
            Some(w) => sqrt(w[i]),
            None => 1.0,
        };
        for j in 0..cols {
            a[j * rows + i] = s * matrix[i * cols + j];
        }
        b[i] = s * y[i];
    }
    let scale = (0..cols).map(|j| norm(&a[j * rows..(j + 1) * rows])).fold(0.0_f64, f64::max);
    if rows < cols || scale == 0.0 {
        let rank = if scale == 0.0 { 0 } else { rows.min(cols) };
        return Err(Error::RankDeficient { rank, columns: cols });
    }

    let mut diag = vec![0.0; cols];
    for j in 0..cols {
        let (head, tail) = a.split_at_mut((j + 1) * rows);
        let col = &mut head[j * rows..];
        let alpha = norm(&col[j..]);
        if alpha <= RANK_TOLERANCE * scale {
            return Err(Error::RankDeficient { rank: j, columns: cols });
        }
        let alpha = if col[j] > 0.0 { -alpha } else { alpha };
        // v = x - alpha e_1, stored in place
        col[j] -= alpha;
        let vnorm2: f64 = col[j..].iter().map(|v| v * v).sum();
        diag[j] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for k in 0..cols - j - 1 {
            let other = &mut tail[k * rows..(k + 1) * rows];
            let dot: f64 = col[j..].iter().zip(&other[j..]).map(|(v, o)| v * o).sum();
            let f = 2.0 * dot / vnorm2;
            for (o, v) in other[j..].iter_mut().zip(&col[j..]) {
                *o -= f * v;
            }
        }
        let dot: f64 = col[j..].iter().zip(&b[j..]).map(|(v, o)| v * o).sum();
        let f = 2.0 * dot / vnorm2;
        for (o, v) in b[j..].iter_mut().zip(&col[j..]) {
            *o -= f * v;
        }
    }

    // back substitution on R (diag in `diag`, strict upper part in `a`)
    let mut coef = vec![0.0; cols];
    for j in (0..cols).rev() {
        let mut acc = b[j];
        for k in j + 1..cols {
            acc -= a[k * rows + j] * coef[k];
        }
        coef[j] = acc / diag[j];
    }
    Ok(coef)
}

fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        // y = 1 + 2x
        let m = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 5.0];
        let y = [1.0, 3.0, 5.0, 11.0];
        let c = weighted_least_squares(&m, 2, &y, None).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] - 2.0).abs() < 1e-12, "{c:?}");
    }

    #[test]
    fn collinear_columns_rejected() {
        let m = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let y = [1.0, 2.0, 3.0];
        assert!(matches!(weighted_least_squares(&m, 2, &y, None), Err(Error::RankDeficient { rank: 1, columns: 2 })));
    }

    #[test]
    fn weights_match_normal_equations() {
        // x = 0,1,2 ; y = 0,2,1 ; w = 1,2,3 -> closed-form weighted regression
        let m = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0];
        let y = [0.0, 2.0, 1.0];
        let w = [1.0, 2.0, 3.0];
        let c = weighted_least_squares(&m, 2, &y, Some(&w)).unwrap();
        let sw = 6.0;
        let xm = (0.0 + 2.0 + 6.0) / sw;
        let ym = (0.0 + 4.0 + 3.0) / sw;
        let sxy = 1.0 * (0.0 - xm) * (0.0 - ym) + 2.0 * (1.0 - xm) * (2.0 - ym) + 3.0 * (2.0 - xm) * (1.0 - ym);
        let sxx = 1.0 * (0.0 - xm) * (0.0 - xm) + 2.0 * (1.0 - xm) * (1.0 - xm) + 3.0 * (2.0 - xm) * (2.0 - xm);
        let slope = sxy / sxx;
        assert!((c[1] - slope).abs() < 1e-12);
        assert!((c[0] - (ym - slope * xm)).abs() < 1e-12);
    }
}
