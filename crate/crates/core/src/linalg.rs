//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
///
/// Column `i` of the returned matrix is the unit eigenvector for `values[i]`.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigenSolver)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigenSolver)?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// `true` when `lambda_min >= -rel_tol * lambda_max` (with a floor on the scale).
pub fn is_psd_spectrum(min: f64, max: f64, rel_tol: f64) -> bool {
    min >= -rel_tol * max.abs().max(f64::EPSILON)
}

/// Index of the first entry whose magnitude is within a relative `1e-9` of the
/// largest magnitude. Used to fix the sign of eigenvectors deterministically.
pub fn sign_pivot<'a>(values: impl Iterator<Item = &'a f64> + Clone) -> Option<usize> {
    let max = values.clone().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return None;
    }
    values.enumerate().find(|(_, v)| v.abs() >= max * (1.0 - 1e-9)).map(|(i, _)| i)
}

/// Diagonal of `a * b` without forming the product.
pub fn diag_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(a.nrows(), |i, _| a.row(i).iter().zip(b.column(i).iter()).map(|(x, y)| x * y).sum())
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Maximum absolute asymmetry `|m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Number of values strictly above `rel_tol` times the largest magnitude.
pub fn numerical_rank(values: &[f64], rel_tol: f64) -> usize {
    let top = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0;
    }
    values.iter().filter(|v| v.abs() > rel_tol * top).count()
}
