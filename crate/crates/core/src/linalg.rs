//! Dense least squares and covariance factors for the small systems the crate solves.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Relative tolerance on `|R_ii|` (or singular values) below which a column is collinear.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// Set when collinear directions were dropped (minimum-norm solution).
    pub rank_deficient: bool,
}

/// Minimizes `sum_i w_i (b_i - a_i . x)^2`; unit weights when `weights` is `None`.
///
/// Full-rank systems go through Householder QR. Collinear designs fall back to an
/// SVD pseudo-inverse that zeroes the collinear directions.
pub fn weighted_least_squares(a: &DMatrix<f64>, b: &[f64], weights: Option<&[f64]>) -> LeastSquares {
    let (n, p) = a.shape();
    debug_assert_eq!(b.len(), n);
    let mut aw = a.clone();
    let mut bw = DVector::from_column_slice(b);
    if let Some(w) = weights {
        for (i, &wi) in w.iter().enumerate() {
            let s = libm::sqrt(wi.max(0.0));
            aw.row_mut(i).scale_mut(s);
            bw[i] *= s;
        }
    }
    if n >= p {
        let qr = aw.clone().qr();
        let r = qr.r();
        let diag_max = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let diag_min = (0..p).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if diag_max > 0.0 && diag_min > RANK_TOL * diag_max {
            let mut qtb = bw.clone();
            qr.q_tr_mul(&mut qtb);
            let head = qtb.rows(0, p).into_owned();
            if let Some(x) = r.solve_upper_triangular(&head) {
                if x.iter().all(|v| v.is_finite()) {
                    return LeastSquares {
                        coefficients: x.iter().copied().collect(),
                        rank_deficient: false,
                    };
                }
            }
        }
    }
    let svd = aw.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let x = svd
        .solve(&bw, RANK_TOL * smax.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(p));
    LeastSquares {
        coefficients: x.iter().copied().collect(),
        rank_deficient: true,
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone()).map(|c| c.l())
}

/// Sample covariance (`n - 1` divisor) of the rows of `rows`, each of length `d`.
pub fn sample_covariance(rows: &[&[f64]], d: usize) -> DMatrix<f64> {
    let n = rows.len();
    let mut mean = alloc::vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let a = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let b: Vec<f64> = xs.iter().map(|x| 2.0 + 3.0 * x).collect();
        let fit = weighted_least_squares(&a, &b, None);
        assert!(!fit.rank_deficient);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_are_flagged() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let a = DMatrix::from_fn(4, 3, |i, j| match j {
            0 => 1.0,
            _ => xs[i],
        });
        let b: Vec<f64> = xs.iter().map(|x| 1.0 + x).collect();
        let fit = weighted_least_squares(&a, &b, None);
        assert!(fit.rank_deficient);
        // minimum-norm split of the slope across the duplicated column
        assert!((fit.coefficients[1] - 0.5).abs() < 1e-9);
        assert!((fit.coefficients[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_weights_ignore_rows() {
        let a = DMatrix::from_fn(3, 1, |_, _| 1.0);
        let fit = weighted_least_squares(&a, &[1.0, 1.0, 100.0], Some(&[1.0, 1.0, 0.0]));
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
    }
}
