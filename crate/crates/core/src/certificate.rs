//! Dual certificate `L(rho) = ddiag(K)^{-1} ddiag(K rho) - K` for the
//! diagonal-constrained SDP, and the optimality decision built on it.
//!
//! `rho` is optimal when `L(rho) rho = 0` and `L(rho)` is p.s.d.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

pub const TOL_SLACK: f64 = 1e-8;
pub const TOL_EIG: f64 = 1e-8;
/// Absolute tolerance on `|row_i|^2 - K(i,i)` for a primal-feasible factor.
pub const TOL_FEAS: f64 = 1e-8;
/// Number of least eigenvalues reported.
pub const N_LEAST: usize = 6;

fn check_square(k: &DMatrix<f64>, other: usize) -> Result<usize> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: k.ncols() });
    }
    if other != n {
        return Err(Error::DimensionMismatch { expected: n, found: other });
    }
    if let Some(i) = (0..n).find(|&i| !(k[(i, i)] > 0.0)) {
        return Err(Error::Precondition(format!("K({i},{i}) = {:e} is not strictly positive", k[(i, i)])));
    }
    Ok(n)
}

fn assemble(k: &DMatrix<f64>, krho_diag: &DVector<f64>) -> DMatrix<f64> {
    let mut l = -k.clone();
    for i in 0..k.nrows() {
        l[(i, i)] += krho_diag[i] / k[(i, i)];
    }
    l
}

/// `L(rho)` for a symmetric `rho`.
pub fn certificate_matrix(k: &DMatrix<f64>, rho: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(k, rho.nrows())?;
    if rho.ncols() != rho.nrows() {
        return Err(Error::DimensionMismatch { expected: rho.nrows(), found: rho.ncols() });
    }
    if linalg::asymmetry(rho) > 1e-12 * linalg::max_abs(rho).max(1.0) {
        return Err(Error::Precondition("rho is not symmetric".into()));
    }
    Ok(assemble(k, &linalg::diag_of_product(k, rho)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    /// `|L H_Xi|_F / |H_Xi|_F`.
    pub slackness_residual: f64,
    /// Smallest eigenvalues of `L`, ascending (at most six).
    pub least_eigenvalues: Vec<f64>,
    pub largest_eigenvalue: f64,
    /// Dual objective minus primal objective.
    pub duality_gap: f64,
    /// `Tr(K rho)`.
    pub primal_objective: f64,
    /// `Tr(ddiag(K) L) + Tr(ddiag(K) K)`.
    pub dual_objective: f64,
    /// `D = L + K`, i.e. `(K rho)(i,i) / K(i,i)`.
    pub d_diagonal: Vec<f64>,
    /// `min_i D(i,i) - K(i,i)`; nonnegative on optimal solutions.
    pub d_margin: f64,
    pub is_certified: bool,
    pub tol_slack: f64,
    pub tol_eig: f64,
}

/// Check optimality of `rho = H_Xi H_Xi^T` for a factor whose rows satisfy
/// `|row_i|^2 = K(i,i)`.
pub fn check_optimality(k: &DMatrix<f64>, h_xi: &DMatrix<f64>) -> Result<CertificateReport> {
    let n = check_square(k, h_xi.nrows())?;
    for i in 0..n {
        let found = h_xi.row(i).norm_squared();
        let expected = k[(i, i)];
        if !((found - expected).abs() <= TOL_FEAS) {
            return Err(Error::Infeasible { index: i, expected, found });
        }
    }

    let kh = k * h_xi;
    // (K rho)(i,i) = (K H)_i . h_i
    let krho_diag = DVector::from_fn(n, |i, _| kh.row(i).dot(&h_xi.row(i)));
    let l = assemble(k, &krho_diag);

    let lh = &l * h_xi;
    let hn = h_xi.norm();
    let slackness_residual = if hn > 0.0 { lh.norm() / hn } else { 0.0 };

    let values = linalg::sym_eigenvalues(&l)?;
    let least_eigenvalues: Vec<f64> = values.iter().take(N_LEAST).copied().collect();
    let largest_eigenvalue = values[n - 1];

    let primal_objective: f64 = krho_diag.sum();
    let tr_dl: f64 = (0..n).map(|i| k[(i, i)] * l[(i, i)]).sum();
    let tr_dk: f64 = (0..n).map(|i| k[(i, i)] * k[(i, i)]).sum();
    let dual_objective = tr_dl + tr_dk;

    let d_diagonal: Vec<f64> = (0..n).map(|i| krho_diag[i] / k[(i, i)]).collect();
    let d_margin = (0..n).map(|i| d_diagonal[i] - k[(i, i)]).fold(f64::INFINITY, f64::min);

    let is_certified = slackness_residual <= TOL_SLACK
        && least_eigenvalues[0] >= -TOL_EIG * largest_eigenvalue.max(1.0);

    Ok(CertificateReport {
        slackness_residual,
        least_eigenvalues,
        largest_eigenvalue,
        duality_gap: dual_objective - primal_objective,
        primal_objective,
        dual_objective,
        d_diagonal,
        d_margin,
        is_certified,
        tol_slack: TOL_SLACK,
        tol_eig: TOL_EIG,
    })
}

/// Checks of the equivalent nuclear-norm formulation with
/// `I - K = Sigma Sigma^T` and `X = Sigma^T rho Sigma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuclearReport {
    pub rank_x: usize,
    pub rank_rho: usize,
    pub trace_x: f64,
    pub nuclear_norm_x: f64,
    /// `|Tr X - Tr(rho (I - K))|`.
    pub trace_identity_residual: f64,
    /// `max_i |(Sigma^{-T} X Sigma^{-1})(i,i) - K(i,i)|`.
    pub constraint_residual: f64,
    pub passed: bool,
}

/// `rank_tol` is relative to the square root of the largest eigenvalue, so
/// it matches a singular-value threshold on a factor of `rho`.
pub fn nuclear_equivalence_check(k: &DMatrix<f64>, rho: &DMatrix<f64>, rank_tol: f64) -> Result<NuclearReport> {
    let n = check_square(k, rho.nrows())?;
    let (kv, kvec) = linalg::sym_eigen(k)?;
    let kmax = kv[n - 1];
    if kmax >= 1.0 {
        return Err(Error::Precondition(format!("largest eigenvalue of K is {kmax}, must be below 1")));
    }
    let sig = |p: f64| {
        let d = DVector::from_iterator(n, kv.iter().map(|v| (1.0 - v).powf(p)));
        &kvec * DMatrix::from_diagonal(&d) * kvec.transpose()
    };
    let (sigma, sigma_inv) = (sig(0.5), sig(-0.5));

    let x = sigma.transpose() * rho * &sigma;
    let x = (&x + x.transpose()) * 0.5;
    let xv = linalg::sym_eigenvalues(&x)?;
    let rv = linalg::sym_eigenvalues(rho)?;
    let root = |v: &[f64]| v.iter().map(|e| e.max(0.0).sqrt()).collect::<Vec<_>>();
    let rank_x = linalg::numerical_rank(&root(&xv), rank_tol);
    let rank_rho = linalg::numerical_rank(&root(&rv), rank_tol);

    let trace_x = x.trace();
    let nuclear_norm_x: f64 = xv.iter().map(|v| v.abs()).sum();
    let ik = DMatrix::identity(n, n) - k;
    let trace_identity_residual = (trace_x - (rho * ik).trace()).abs();

    let back = sigma_inv.transpose() * &x * &sigma_inv;
    let constraint_residual = (0..n).map(|i| (back[(i, i)] - k[(i, i)]).abs()).fold(0.0, f64::max);

    let scale = trace_x.abs().max(1.0);
    let passed = rank_x == rank_rho
        && (nuclear_norm_x - trace_x).abs() <= 1e-10 * scale
        && trace_identity_residual <= 1e-10 * scale
        && constraint_residual <= 1e-8;

    Ok(NuclearReport { rank_x, rank_rho, trace_x, nuclear_norm_x, trace_identity_residual, constraint_residual, passed })
}
