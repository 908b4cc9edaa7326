//! Embedding coordinates from a solved factor, and the geometric identities
//! they satisfy at an optimum.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_RANK_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct EmbeddingResult {
    /// `N x r`, column `l` is `chi_l`.
    pub xi: DMatrix<f64>,
    /// All singular values of `H_Xi`, descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// `ddiag(K)^{1/2} H`.
    pub h_xi: DMatrix<f64>,
}

impl EmbeddingResult {
    pub fn len(&self) -> usize {
        self.xi.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.nrows() == 0
    }

    /// `rho = Xi Xi^T`.
    pub fn rho(&self) -> DMatrix<f64> {
        &self.xi * self.xi.transpose()
    }
}

/// `H_Xi = ddiag(K)^{1/2} H`, thin SVD `H_Xi = U S V^T`, and `Xi` the first
/// `r` columns of `U S` where `r` counts singular values above
/// `rank_tol * S_1`. Each column is signed so that its first largest-magnitude
/// entry is positive.
///
/// The SVD is taken through the eigen-decomposition of the `r0 x r0` Gram
/// matrix `H_Xi^T H_Xi = V S^2 V^T`, with `U S = H_Xi V`. Singular values
/// below about `1e-8 * S_1` are therefore not resolved, which is well under
/// any sensible `rank_tol`.
pub fn factor_to_embedding(k: &DMatrix<f64>, h: &DMatrix<f64>, rank_tol: f64) -> Result<EmbeddingResult> {
    let n = k.nrows();
    if h.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: h.nrows() });
    }
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("rank_tol must lie in (0, 1), got {rank_tol}")));
    }
    if let Some(i) = (0..n).find(|&i| (h.row(i).norm() - 1.0).abs() > 1e-10) {
        return Err(Error::Precondition(format!("factor row {i} does not have unit norm")));
    }
    if let Some(i) = (0..n).find(|&i| !(k[(i, i)] >= 0.0)) {
        return Err(Error::Precondition(format!("K({i},{i}) is negative")));
    }
    let s = DVector::from_fn(n, |i, _| k[(i, i)].sqrt());
    let h_xi = DMatrix::from_diagonal(&s) * h;

    let gram = h_xi.transpose() * &h_xi;
    let gram = (&gram + gram.transpose()) * 0.5;
    let (vals, v) = linalg::sym_eigen(&gram)?;
    let order: Vec<usize> = (0..vals.len()).rev().collect();
    let singular_values: Vec<f64> = order.iter().map(|&c| vals[c].max(0.0).sqrt()).collect();

    let rank = linalg::numerical_rank(&singular_values, rank_tol);
    if rank == 0 {
        return Err(Error::Internal("all singular values of H_Xi are zero".into()));
    }
    let mut xi = DMatrix::zeros(n, rank);
    for (c, &src) in order.iter().take(rank).enumerate() {
        let col = &h_xi * v.column(src);
        let flip = match linalg::sign_pivot(col.iter()) {
            Some(p) if col[p] < 0.0 => -1.0,
            _ => 1.0,
        };
        xi.set_column(c, &(col * flip));
    }
    Ok(EmbeddingResult { xi, singular_values, rank, h_xi })
}

/// `|Xi(i) - Xi(j)|`, the distance induced by `rho`.
pub fn kernel_distance(e: &EmbeddingResult, i: usize, j: usize) -> Result<f64> {
    let n = e.len();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("index out of range for N = {n}")));
    }
    Ok((e.xi.row(i) - e.xi.row(j)).norm())
}

fn krho_diagonal(k: &DMatrix<f64>, e: &EmbeddingResult) -> (DMatrix<f64>, Vec<f64>) {
    let kx = k * &e.xi;
    let d = (0..e.len()).map(|i| kx.row(i).dot(&e.xi.row(i))).collect();
    (kx, d)
}

/// Largest `|chi_l(i) - K(i,i)/(K rho)(i,i) * (K chi_l)(i)|`.
pub fn mean_value_check(k: &DMatrix<f64>, e: &EmbeddingResult) -> Result<f64> {
    if k.nrows() != e.len() {
        return Err(Error::DimensionMismatch { expected: k.nrows(), found: e.len() });
    }
    let (kx, krho) = krho_diagonal(k, e);
    let mut worst = 0.0_f64;
    for i in 0..e.len() {
        if !(krho[i] > 0.0) {
            return Err(Error::Internal(format!("(K rho)({i},{i}) = {:e} is not positive", krho[i])));
        }
        let f = k[(i, i)] / krho[i];
        for l in 0..e.rank {
            worst = worst.max((e.xi[(i, l)] - f * kx[(i, l)]).abs());
        }
    }
    Ok(worst)
}

/// Geometric diagnostics of an embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    /// `max_i | |Xi(i)|^2 - K(i,i) |`.
    pub rigidity: f64,
    /// Largest distance of a norm `|Xi(i)|` outside `[min sqrt K(j,j), max sqrt K(j,j)]`.
    pub shell_excess: f64,
    /// Largest off-diagonal entry of `Xi^T Xi` relative to its largest diagonal entry.
    pub column_orthogonality: f64,
    /// Largest difference, in radians, between the angle of `(K Xi)(i), (K Xi)(j)`
    /// and that of `Xi(i), Xi(j)`.
    pub conformality: f64,
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let c: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    c.clamp(-1.0, 1.0).acos()
}

pub fn geometry_report(k: &DMatrix<f64>, e: &EmbeddingResult) -> Result<GeometryReport> {
    let n = e.len();
    if k.nrows() != n {
        return Err(Error::DimensionMismatch { expected: k.nrows(), found: n });
    }
    let norms: Vec<f64> = (0..n).map(|i| e.xi.row(i).norm()).collect();
    let rigidity = (0..n).map(|i| (norms[i] * norms[i] - k[(i, i)]).abs()).fold(0.0, f64::max);

    let roots: Vec<f64> = (0..n).map(|i| k[(i, i)].max(0.0).sqrt()).collect();
    let lo = roots.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = roots.iter().copied().fold(0.0, f64::max);
    let shell_excess = norms.iter().map(|&v| (lo - v).max(v - hi).max(0.0)).fold(0.0, f64::max);

    let gram = e.xi.transpose() * &e.xi;
    let top = (0..e.rank).map(|c| gram[(c, c)]).fold(0.0, f64::max);
    let mut off = 0.0_f64;
    for a in 0..e.rank {
        for b in 0..e.rank {
            if a != b {
                off = off.max(gram[(a, b)].abs());
            }
        }
    }
    let column_orthogonality = if top > 0.0 { off / top } else { 0.0 };

    let kx = k * &e.xi;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| e.xi.row(i).iter().copied().collect()).collect();
    let krows: Vec<Vec<f64>> = (0..n).map(|i| kx.row(i).iter().copied().collect()).collect();
    let mut conformality = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            conformality = conformality.max((angle(&krows[i], &krows[j]) - angle(&rows[i], &rows[j])).abs());
        }
    }

    Ok(GeometryReport { rigidity, shell_excess, column_orthogonality, conformality })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{build_coupling, solve, SolverConfig};

    fn c() -> f64 {
        let a = (-1.0_f64).exp();
        (1.0 - a) / (2.0 * (1.0 + a))
    }

    fn k2() -> DMatrix<f64> {
        let c = c();
        DMatrix::from_row_slice(2, 2, &[c, -c, -c, c])
    }

    fn two_point_embedding() -> EmbeddingResult {
        let st = solve(&build_coupling(&k2()).unwrap(), &SolverConfig { r0: 2, ..Default::default() }).unwrap();
        factor_to_embedding(&k2(), &st.h, DEFAULT_RANK_TOL).unwrap()
    }

    #[test]
    fn two_point_coordinates() {
        let e = two_point_embedding();
        let sc = c().sqrt();
        assert_eq!(e.rank, 1);
        assert!((sc - 0.4806855).abs() < 1e-7);
        assert!((e.xi[(0, 0)] - sc).abs() < 1e-8);
        assert!((e.xi[(1, 0)] + sc).abs() < 1e-8);
        assert!((kernel_distance(&e, 0, 1).unwrap() - 2.0 * sc).abs() < 1e-8);
        assert_eq!(kernel_distance(&e, 1, 1).unwrap(), 0.0);
        assert!(mean_value_check(&k2(), &e).unwrap() < 1e-12);
    }

    #[test]
    fn duplicated_columns_do_not_change_rank() {
        let k = DMatrix::from_row_slice(3, 3, &[1.0, -0.4, 0.3, -0.4, 1.0, -0.5, 0.3, -0.5, 1.0]);
        let st = solve(&build_coupling(&k).unwrap(), &SolverConfig { r0: 2, ..Default::default() }).unwrap();
        let base = factor_to_embedding(&k, &st.h, DEFAULT_RANK_TOL).unwrap();
        let dup = DMatrix::from_fn(3, 4, |i, c| st.h[(i, c % 2)] / 2.0_f64.sqrt());
        let e = factor_to_embedding(&k, &dup, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(e.rank, base.rank);
        assert!(linalg::max_abs(&(e.rho() - base.rho())) < 1e-12);
    }

    #[test]
    fn non_unit_factor_is_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(factor_to_embedding(&k2(), &h, 1e-6), Err(Error::Precondition(_))));
    }

    #[test]
    fn nonnegative_fixture_mean_value() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let st = solve(&build_coupling(&k).unwrap(), &SolverConfig { r0: 2, ..Default::default() }).unwrap();
        let e = factor_to_embedding(&k, &st.h, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(e.rank, 1);
        assert!(mean_value_check(&k, &e).unwrap() < 1e-10);
    }

    #[test]
    fn uncertified_factor_breaks_mean_value() {
        let k = DMatrix::from_row_slice(3, 3, &[1.0, -0.4, 0.3, -0.4, 1.0, -0.5, 0.3, -0.5, 1.0]);
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.6, 0.8, 0.0, 1.0]);
        let e = factor_to_embedding(&k, &h, DEFAULT_RANK_TOL).unwrap();
        assert!(mean_value_check(&k, &e).unwrap() > 1e-3);
    }

    #[test]
    fn geometry_of_two_point() {
        let g = geometry_report(&k2(), &two_point_embedding()).unwrap();
        assert!(g.rigidity < 1e-8);
        assert!(g.shell_excess < 1e-8);
        assert_eq!(g.column_orthogonality, 0.0);
        assert!(g.conformality < 1e-6);
    }
}
