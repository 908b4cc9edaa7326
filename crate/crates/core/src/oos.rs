//! Projected Nyström extension of an embedding and of its kernel to new
//! points, with diagnostics of the bordered (N+1)-point problem.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::embed::EmbeddingResult;
use crate::error::{Error, Result};
use crate::kernel::{extension_row, DiffusionKernel, ExtensionRow};
use crate::linalg;

/// Relative threshold below which the Nyström sum is treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedPoint {
    /// `chi_l(xbar)`, zero when degenerate.
    pub coords: Vec<f64>,
    pub kappa: f64,
    pub degenerate: bool,
    /// Coefficients of the new column of `rho` in the `chi` basis.
    pub b_coeffs: Vec<f64>,
    /// Smallest admissible new diagonal entry, `sum_l b_l^2`.
    pub s_min: f64,
}

/// Project `Xi^T kvec` onto the sphere of radius `sqrt(kappa)`.
pub fn extend_from_row(xi: &DMatrix<f64>, kvec: &DVector<f64>, kappa: f64) -> Result<ExtendedPoint> {
    if kvec.len() != xi.nrows() {
        return Err(Error::DimensionMismatch { expected: xi.nrows(), found: kvec.len() });
    }
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("kappa must be nonnegative, got {kappa}")));
    }
    let r = xi.ncols();
    let g = xi.transpose() * kvec;
    let gn = g.norm();
    let row_norm = (kvec.norm_squared() + kappa * kappa).sqrt();
    let sk = kappa.sqrt();
    if gn <= DEGENERATE_TOL * sk * row_norm || gn == 0.0 {
        return Ok(ExtendedPoint { coords: vec![0.0; r], kappa, degenerate: true, b_coeffs: vec![0.0; r], s_min: 0.0 });
    }
    let coords: Vec<f64> = g.iter().map(|v| sk * v / gn).collect();
    let s_min = coords.iter().map(|v| v * v).sum();
    Ok(ExtendedPoint { b_coeffs: coords.clone(), coords, kappa, degenerate: false, s_min })
}

/// Extend the embedding to `xbar`.
pub fn extend_point(dk: &DiffusionKernel, e: &EmbeddingResult, xbar: &[f64]) -> Result<ExtendedPoint> {
    check_sizes(dk, e)?;
    let row = extension_row(dk, xbar)?;
    extend_from_row(&e.xi, &row.kvec, row.kappa)
}

/// Extend to every row of `points` independently.
pub fn extend_points(dk: &DiffusionKernel, e: &EmbeddingResult, points: &DMatrix<f64>) -> Result<Vec<ExtendedPoint>> {
    (0..points.nrows())
        .map(|i| {
            let x: Vec<f64> = points.row(i).iter().copied().collect();
            extend_point(dk, e, &x)
        })
        .collect()
}

fn check_sizes(dk: &DiffusionKernel, e: &EmbeddingResult) -> Result<()> {
    if dk.len() != e.len() {
        return Err(Error::DimensionMismatch { expected: dk.len(), found: e.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtendedKernelValue {
    pub value: f64,
    /// Either argument had a degenerate extension; `value` is then 0.
    pub degenerate: bool,
}

/// `rho(x, y) = sum_l chi_l(x) chi_l(y)` with both arguments extended.
pub fn extend_kernel(dk: &DiffusionKernel, e: &EmbeddingResult, x: &[f64], y: &[f64]) -> Result<ExtendedKernelValue> {
    let (a, b) = (extend_point(dk, e, x)?, extend_point(dk, e, y)?);
    if a.degenerate || b.degenerate {
        return Ok(ExtendedKernelValue { value: 0.0, degenerate: true });
    }
    let value = a.coords.iter().zip(&b.coords).map(|(u, v)| u * v).sum();
    Ok(ExtendedKernelValue { value, degenerate: false })
}

/// The same kernel written without eigenvectors:
/// `sqrt(kx kappa_y) kx^T rho ky / sqrt(kx^T rho kx * ky^T rho ky)`.
pub fn extend_kernel_explicit(dk: &DiffusionKernel, rho: &DMatrix<f64>, x: &[f64], y: &[f64]) -> Result<f64> {
    if rho.nrows() != dk.len() {
        return Err(Error::DimensionMismatch { expected: dk.len(), found: rho.nrows() });
    }
    let (rx, ry) = (extension_row(dk, x)?, extension_row(dk, y)?);
    let (px, py) = (rho * &rx.kvec, rho * &ry.kvec);
    let (nx, ny) = (rx.kvec.dot(&px), ry.kvec.dot(&py));
    if !(nx > 0.0 && ny > 0.0) {
        return Ok(0.0);
    }
    Ok((rx.kappa * ry.kappa).sqrt() * rx.kvec.dot(&py) / (nx * ny).sqrt())
}

/// `Tr(rho_bar K_bar)` for the bordered matrices with new embedding row `u`.
pub fn bordered_objective(k: &DMatrix<f64>, xi: &DMatrix<f64>, row: &ExtensionRow, u: &[f64]) -> Result<f64> {
    let n = k.nrows();
    if xi.nrows() != n || row.kvec.len() != n || u.len() != xi.ncols() {
        return Err(Error::DimensionMismatch { expected: xi.ncols(), found: u.len() });
    }
    let kbar = bordered_kernel(k, &row.kvec, row.kappa);
    let xbar = stack_row(xi, u);
    let rhobar = &xbar * xbar.transpose();
    Ok((&rhobar * &kbar).trace())
}

fn bordered_kernel(k: &DMatrix<f64>, kvec: &DVector<f64>, kappa: f64) -> DMatrix<f64> {
    let n = k.nrows();
    let mut kbar = DMatrix::zeros(n + 1, n + 1);
    kbar.view_mut((0, 0), (n, n)).copy_from(k);
    for i in 0..n {
        kbar[(i, n)] = kvec[i];
        kbar[(n, i)] = kvec[i];
    }
    kbar[(n, n)] = kappa;
    kbar
}

fn stack_row(xi: &DMatrix<f64>, u: &[f64]) -> DMatrix<f64> {
    let (n, r) = xi.shape();
    DMatrix::from_fn(n + 1, r, |i, c| if i < n { xi[(i, c)] } else { u[c] })
}

fn bordered_rho(rho: &DMatrix<f64>, b: &DVector<f64>, s: f64) -> DMatrix<f64> {
    bordered_kernel(rho, b, s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    /// `chi_l^T b / |chi_l|^2`.
    pub coefficients: Vec<f64>,
    /// `|b - sum_l coefficients_l chi_l|`.
    pub range_residual: f64,
    pub in_range: bool,
    pub s_min: f64,
    /// Least eigenvalue of `[[rho, b], [b^T, s_min]]`.
    pub lambda_min_at_s_min: f64,
    /// Least eigenvalue at `0.9 s_min`, when `b` is in range and `s_min > 0`.
    pub lambda_min_below_s_min: Option<f64>,
    /// `(s, least eigenvalue)` for `s` in {1, 10, 100}, when `b` is out of range.
    pub lambda_min_out_of_range: Vec<(f64, f64)>,
    /// `|[[rho, b], [b^T, s_min]] - sum_l [chi_l; b_l][chi_l; b_l]^T|_max`.
    pub rank_one_residual: f64,
}

/// Which borders `[[rho, b], [b^T, s]]` keep `rho` p.s.d.: exactly those
/// with `b` in the range of `rho` and `s >= s_min`.
pub fn block_extension_analysis(e: &EmbeddingResult, b: &DVector<f64>) -> Result<BlockReport> {
    let n = e.len();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("border vector".into()));
    }
    let bn = b.norm();
    if bn == 0.0 {
        return Err(Error::InvalidArgument("border vector must be nonzero".into()));
    }
    let coefficients: Vec<f64> =
        (0..e.rank).map(|l| e.xi.column(l).dot(b) / e.xi.column(l).norm_squared()).collect();
    let mut proj = DVector::zeros(n);
    for (l, &c) in coefficients.iter().enumerate() {
        proj.axpy(c, &e.xi.column(l), 1.0);
    }
    let range_residual = (b - &proj).norm();
    let in_range = range_residual <= 1e-8 * bn;
    let s_min: f64 = coefficients.iter().map(|c| c * c).sum();

    let rho = e.rho();
    let lmin = |s: f64| -> Result<f64> { Ok(linalg::sym_eigenvalues(&bordered_rho(&rho, b, s))?[0]) };
    let lambda_min_at_s_min = lmin(s_min)?;
    let lambda_min_below_s_min = if in_range && s_min > 0.0 { Some(lmin(0.9 * s_min)?) } else { None };
    let mut lambda_min_out_of_range = Vec::new();
    if !in_range {
        for s in [1.0, 10.0, 100.0] {
            lambda_min_out_of_range.push((s, lmin(s)?));
        }
    }

    let stacked = stack_row(&e.xi, &coefficients);
    let rank_one_residual = linalg::max_abs(&(bordered_rho(&rho, b, s_min) - &stacked * stacked.transpose()));

    Ok(BlockReport {
        coefficients,
        range_residual,
        in_range,
        s_min,
        lambda_min_at_s_min,
        lambda_min_below_s_min,
        lambda_min_out_of_range,
        rank_one_residual,
    })
}

/// One evaluation of the lower bound on `v_bar^T L_bar v_bar`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundSample {
    /// `v_bar^T L_bar v_bar` at random last components `v_s`.
    pub random_forms: Vec<f64>,
    /// `sqrt(kappa) k^T v / sqrt(k^T rho k)`.
    pub v_s_min: f64,
    /// The form at `v_s = v_s_min`.
    pub form_at_v_s_min: f64,
    /// `v^T (ddiag(rho)^{-1} ddiag(K~ rho) - K~) v` with
    /// `K~ = K + sqrt(kappa) k k^T / sqrt(k^T rho k)`.
    pub reduced_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedSdpReport {
    pub trace_direct: f64,
    /// `Tr(rho K) + 2 sqrt(kappa) sqrt(k^T rho k) + kappa^2`.
    pub trace_formula: f64,
    pub trace_residual: f64,
    /// `Tr(rho_bar L_bar)`.
    pub trace_rho_l: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `|L_bar Xi_bar|_F / |Xi_bar|_F`.
    pub slackness_residual: f64,
    pub is_certified: bool,
    pub samples: Vec<LowerBoundSample>,
}

/// Certificate diagnostics of the bordered problem at `xbar`.
pub fn extended_sdp_certificate(dk: &DiffusionKernel, e: &EmbeddingResult, xbar: &[f64]) -> Result<ExtendedSdpReport> {
    check_sizes(dk, e)?;
    let row = extension_row(dk, xbar)?;
    extended_sdp_certificate_from_row(&dk.k, e, &row.kvec, row.kappa)
}

/// [`extended_sdp_certificate`] for an explicit border `(kvec, kappa)`.
pub fn extended_sdp_certificate_from_row(
    k: &DMatrix<f64>,
    e: &EmbeddingResult,
    kvec: &DVector<f64>,
    kappa: f64,
) -> Result<ExtendedSdpReport> {
    let n = k.nrows();
    if e.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: e.len() });
    }
    let ext = extend_from_row(&e.xi, kvec, kappa)?;
    if ext.degenerate || !(kappa > 0.0) {
        return Err(Error::Precondition("extension is degenerate at this point".into()));
    }
    let rho = e.rho();
    let krk = kvec.dot(&(&rho * kvec));

    let kbar = bordered_kernel(k, kvec, kappa);
    let xibar = stack_row(&e.xi, &ext.coords);
    let rhobar = &xibar * xibar.transpose();
    let trace_direct = (&rhobar * &kbar).trace();
    let trace_formula = (&rho * k).trace() + 2.0 * kappa.sqrt() * krk.sqrt() + kappa * kappa;

    let kx = &kbar * &xibar;
    let mut lbar = -kbar.clone();
    for i in 0..=n {
        lbar[(i, i)] += kx.row(i).dot(&xibar.row(i)) / kbar[(i, i)];
    }
    let trace_rho_l = (&rhobar * &lbar).trace();
    let values = linalg::sym_eigenvalues(&lbar)?;
    let (lambda_min, lambda_max) = (values[0], values[n]);
    let slackness_residual = (&lbar * &xibar).norm() / xibar.norm();
    let is_certified = slackness_residual <= crate::certificate::TOL_SLACK
        && lambda_min >= -crate::certificate::TOL_EIG * lambda_max.max(1.0);

    // K~ and its certificate-like matrix on the first N coordinates.
    let w = kappa.sqrt() / krk.sqrt();
    let ktilde = k + kvec * kvec.transpose() * w;
    let ktr = linalg::diag_of_product(&ktilde, &rho);
    let mut reduced = -ktilde;
    for i in 0..n {
        reduced[(i, i)] += ktr[i] / rho[(i, i)];
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let form = |v: &DVector<f64>, vs: f64| -> f64 {
        let mut vb = DVector::zeros(n + 1);
        vb.rows_mut(0, n).copy_from(v);
        vb[n] = vs;
        vb.dot(&(&lbar * &vb))
    };
    let mut samples = Vec::new();
    for _ in 0..8 {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v_s_min = w * kvec.dot(&v);
        let random_forms = (0..4).map(|_| form(&v, v_s_min + rng.random_range(-2.0..2.0))).collect();
        samples.push(LowerBoundSample {
            random_forms,
            v_s_min,
            form_at_v_s_min: form(&v, v_s_min),
            reduced_form: v.dot(&(&reduced * &v)),
        });
    }

    Ok(ExtendedSdpReport {
        trace_direct,
        trace_formula,
        trace_residual: (trace_direct - trace_formula).abs(),
        trace_rho_l,
        lambda_min,
        lambda_max,
        slackness_residual,
        is_certified,
        samples,
    })
}
