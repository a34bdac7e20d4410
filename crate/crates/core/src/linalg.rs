//! Thin wrappers over nalgebra for the small dense systems used per point.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeometryError, Result};

/// Relative pivot threshold below which a symmetric matrix counts as degenerate.
pub const PIVOT_RTOL: f64 = 1e-10;

/// Cholesky test of a symmetric row-major `n x n` matrix.
///
/// Fails when the factorization breaks down or the smallest pivot falls below
/// `PIVOT_RTOL` times the largest diagonal entry.
pub fn check_positive_definite(m: &[f64], n: usize) -> Result<()> {
    let scale = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max);
    let mat = DMatrix::from_row_slice(n, n, m);
    let Some(chol) = mat.cholesky() else {
        return Err(GeometryError::DegenerateMetric { pivot: f64::NAN, scale });
    };
    let l = chol.l();
    let pivot = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(pivot >= PIVOT_RTOL * scale) {
        return Err(GeometryError::DegenerateMetric { pivot, scale });
    }
    Ok(())
}

/// Whether the Cholesky factorization succeeds (no threshold).
pub fn is_positive_definite(m: &[f64], n: usize) -> bool {
    DMatrix::from_row_slice(n, n, m).cholesky().is_some()
}

pub fn inverse(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let inv = DMatrix::from_row_slice(n, n, m).try_inverse()?;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = inv[(i, j)];
        }
    }
    Some(out)
}

pub fn solve(m: &[f64], n: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let lu = DMatrix::from_row_slice(n, n, m).lu();
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|v| v.iter().copied().collect())
}

/// Least-squares solution of `A x = b` for a row-major `rows x cols` matrix.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mat = DMatrix::from_row_slice(rows, cols, a);
    let svd = mat.svd(true, true);
    svd.solve(&DVector::from_column_slice(b), 1e-13)
        .ok()
        .map(|v| v.iter().copied().collect())
}

pub fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..m.len() / n)
        .map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum())
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
