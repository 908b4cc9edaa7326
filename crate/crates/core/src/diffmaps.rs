//! Diffusion maps: transition matrix, bi-orthogonal spectral basis,
//! diffusion map embedding and diffusion distance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::BaseKernelState;
use crate::linalg;

/// `p(x, y) = k(x, y) / d(x)`.
pub fn transition_matrix(base: &BaseKernelState) -> DMatrix<f64> {
    let n = base.len();
    DMatrix::from_fn(n, n, |i, j| base.gram[(i, j)] / base.degrees[i])
}

/// Spectral decomposition `p_t(x, y) = sum_l lambda_l^t psi_l(x) phi_l(y)`.
#[derive(Debug, Clone)]
pub struct DiffusionBasis {
    /// Descending, clamped to `[0, 1]`.
    pub eigenvalues: Vec<f64>,
    /// Right eigenvectors of `p`, one per column.
    pub psi: DMatrix<f64>,
    /// Left eigenvectors of `p`, one per column.
    pub phi: DMatrix<f64>,
    /// Stationary distribution `d / vol`.
    pub phi0: DVector<f64>,
    /// Orthonormal eigenvectors of the symmetric conjugate `D^{-1/2} k D^{-1/2}`.
    pub u: DMatrix<f64>,
}

impl DiffusionBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Eigen-decompose the symmetric conjugate of `p` and map back with
/// `phi_l = sqrt(phi0) u_l`, `psi_l = u_l / sqrt(phi0)`.
///
/// The top eigenvector `u_0 = sqrt(phi0)` is known in closed form. It is
/// deflated to eigenvalue -1 before the eigensolve so that it stays exact
/// even when well separated clusters make `lambda_1` round to 1.
pub fn spectral_basis(base: &BaseKernelState) -> Result<DiffusionBasis> {
    let n = base.len();
    let phi0 = DVector::from_fn(n, |i, _| base.degrees[i] / base.volume);
    let u0 = phi0.map(f64::sqrt);
    let mut sym = DMatrix::from_fn(n, n, |i, j| base.gram[(i, j)] / (base.degrees[i] * base.degrees[j]).sqrt());
    sym.ger(-2.0, &u0, &u0, 1.0);
    let sym = (&sym + sym.transpose()) * 0.5;
    let (vals, vecs) = linalg::sym_eigen(&sym)?;

    let mut u = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    eigenvalues.push(1.0);
    u.set_column(0, &u0);
    // vals[0] is the deflated u_0
    for (c, src) in (1..n).rev().enumerate() {
        eigenvalues.push(vals[src].clamp(0.0, 1.0));
        let col = vecs.column(src);
        let flip = match linalg::sign_pivot(col.iter()) {
            Some(p) if col[p] < 0.0 => -1.0,
            _ => 1.0,
        };
        u.set_column(c + 1, &(col * flip));
    }

    let sphi0: Vec<f64> = u0.iter().copied().collect();
    let psi = DMatrix::from_fn(n, n, |i, l| u[(i, l)] / sphi0[i]);
    let phi = DMatrix::from_fn(n, n, |i, l| u[(i, l)] * sphi0[i]);
    Ok(DiffusionBasis { eigenvalues, psi, phi, phi0, u })
}

/// `N x m` matrix whose column `l - 1` is `lambda_l^t psi_l`, `l = 1..m`.
pub fn diffusion_map(basis: &DiffusionBasis, t: f64, m: usize) -> Result<DMatrix<f64>> {
    let n = basis.len();
    if m < 1 || m + 1 > n {
        return Err(Error::InvalidArgument(format!("diffusion map needs 1 <= m <= N-1 = {}, got {m}", n.saturating_sub(1))));
    }
    check_time(t)?;
    Ok(DMatrix::from_fn(n, m, |i, c| basis.eigenvalues[c + 1].powf(t) * basis.psi[(i, c + 1)]))
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("diffusion time must be finite and nonnegative, got {t}")))
    }
}

/// Row `x` of `p_t` from the spectral expansion, truncated to terms `0..terms`.
fn transition_row(basis: &DiffusionBasis, t: f64, x: usize, terms: usize) -> DVector<f64> {
    let n = basis.len();
    let mut row = DVector::zeros(n);
    for l in 0..terms {
        let w = basis.eigenvalues[l].powf(t) * basis.psi[(x, l)];
        row.axpy(w, &basis.phi.column(l), 1.0);
    }
    row
}

/// `p_t` for real `t >= 0`.
pub fn transition_power(basis: &DiffusionBasis, t: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    let n = basis.len();
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        p.set_row(x, &transition_row(basis, t, x, n).transpose());
    }
    Ok(p)
}

/// `D_t(x_i, x_j)^2 = sum_y (p_t(x_i, y) - p_t(x_j, y))^2 / phi0(y)`.
pub fn diffusion_distance(basis: &DiffusionBasis, t: f64, i: usize, j: usize) -> Result<f64> {
    let n = basis.len();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("index out of range for N = {n}")));
    }
    check_time(t)?;
    if i == j {
        return Ok(0.0);
    }
    let (a, b) = (transition_row(basis, t, i, n), transition_row(basis, t, j, n));
    let s: f64 = (0..n).map(|y| (a[y] - b[y]).powi(2) / basis.phi0[y]).sum();
    Ok(s.sqrt())
}

/// `K_t = Psi_t Psi_t^T` over the full map.
pub fn diffusion_kernel_t(basis: &DiffusionBasis, t: f64) -> Result<DMatrix<f64>> {
    if basis.len() < 2 {
        return Ok(DMatrix::zeros(basis.len(), basis.len()));
    }
    let map = diffusion_map(basis, t, basis.len() - 1)?;
    Ok(&map * map.transpose())
}

/// Mean over training points of `|p_t(x, .) - p_t^(m)(x, .)|^2` in the
/// `1/phi0` weighted norm, where `p_t^(m)` keeps the terms `0..=m`.
pub fn truncation_error(basis: &DiffusionBasis, t: f64, m: usize) -> Result<f64> {
    check_time(t)?;
    let n = basis.len();
    if m + 1 > n {
        return Err(Error::InvalidArgument(format!("truncation order {m} exceeds N-1")));
    }
    let mut total = 0.0;
    for x in 0..n {
        let full = transition_row(basis, t, x, n);
        let trunc = transition_row(basis, t, x, m + 1);
        total += (0..n).map(|y| (full[y] - trunc[y]).powi(2) / basis.phi0[y]).sum::<f64>();
    }
    Ok(total / n as f64)
}
