//! Projected power method for
//! `max Tr(H^T J H)` over `N x r0` factors with unit rows.
//!
//! With `rho~ = H H^T` and `J = ddiag(K)^{1/2} K ddiag(K)^{1/2}` this is the
//! factorized form of `max Tr(rho K)` subject to `diag(rho) = diag(K)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Rows with a norm below this are treated as zero by [`project_rows`].
pub const ZERO_ROW: f64 = 1e-300;
/// Relative objective decrease tolerated before the solver reports a defect.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub r0: usize,
    pub max_iters: usize,
    pub tol_conv: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { r0: 10, max_iters: 10_000, tol_conv: 1e-10, seed: 0 }
    }
}

impl SolverConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.r0 < 2 || self.r0 > n {
            return Err(Error::InvalidArgument(format!("r0 must satisfy 2 <= r0 <= N = {n}, got {}", self.r0)));
        }
        if !(self.tol_conv > 0.0 && self.tol_conv.is_finite()) {
            return Err(Error::InvalidArgument(format!("tol_conv must be positive, got {}", self.tol_conv)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Iterate of the power method.
#[derive(Debug, Clone)]
pub struct FactorState {
    /// `N x r0`, unit rows.
    pub h: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|G|_F / |J H|_F` with `G` the tangential part of `J H`; zero at
    /// first-order critical points.
    pub stationarity: f64,
    /// Objective after initialization followed by one entry per iteration.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Coupling {
    pub j: DMatrix<f64>,
    /// `sqrt(K(i,i))`.
    pub sqrt_diag: DVector<f64>,
}

impl Coupling {
    pub fn len(&self) -> usize {
        self.j.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.j.nrows() == 0
    }
}

/// `J = ddiag(K)^{1/2} K ddiag(K)^{1/2}`. Every diagonal entry of `K` must be
/// strictly positive.
pub fn build_coupling(k: &DMatrix<f64>) -> Result<Coupling> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: k.ncols() });
    }
    if let Some(i) = (0..n).find(|&i| !(k[(i, i)] > 0.0)) {
        return Err(Error::Precondition(format!(
            "K({i},{i}) = {:e} is not strictly positive at point {i}",
            k[(i, i)]
        )));
    }
    let asym = linalg::asymmetry(k);
    if asym > 1e-12 * linalg::max_abs(k) {
        return Err(Error::Precondition(format!("K is not symmetric (max asymmetry {asym:e})")));
    }
    let s = DVector::from_fn(n, |i, _| k[(i, i)].sqrt());
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = s[a] * k[(a, b)] * s[b];
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(Coupling { j, sqrt_diag: s })
}

fn random_unit<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Scale every row to unit norm; rows with norm below [`ZERO_ROW`] are
/// replaced by a uniform random unit vector drawn from `rng`.
pub fn project_rows<R: Rng + ?Sized>(m: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let (n, r) = m.shape();
    let mut out = m.clone();
    for i in 0..n {
        let norm = m.row(i).norm();
        if norm < ZERO_ROW || !norm.is_finite() {
            for (c, v) in random_unit(r, rng).into_iter().enumerate() {
                out[(i, c)] = v;
            }
        } else {
            for c in 0..r {
                out[(i, c)] = m[(i, c)] / norm;
            }
        }
    }
    out
}

/// `P(M0)` with the entries of `M0` uniform on `[-1, 1]`, plus the stream
/// that produced it so later zero-row replacements continue from it.
fn init_with_rng(n: usize, cfg: &SolverConfig) -> Result<(DMatrix<f64>, ChaCha8Rng)> {
    cfg.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut m0 = DMatrix::zeros(n, cfg.r0);
    for i in 0..n {
        for c in 0..cfg.r0 {
            m0[(i, c)] = rng.random_range(-1.0..=1.0);
        }
    }
    let h = project_rows(&m0, &mut rng);
    Ok((h, rng))
}

/// Initial feasible factor for an `N`-point problem.
pub fn init_factor(n: usize, cfg: &SolverConfig) -> Result<FactorState> {
    let (h, _) = init_with_rng(n, cfg)?;
    Ok(FactorState { h, objective: f64::NAN, iterations: 0, converged: false, stationarity: f64::NAN, history: Vec::new() })
}

/// `Tr(H^T J H)`.
pub fn objective(j: &Coupling, h: &DMatrix<f64>) -> Result<f64> {
    if h.nrows() != j.len() {
        return Err(Error::DimensionMismatch { expected: j.len(), found: h.nrows() });
    }
    Ok(frob_inner(h, &(&j.j * h)))
}

fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn stationarity(h: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    let mut g2 = 0.0;
    for i in 0..h.nrows() {
        let (hi, mi) = (h.row(i), m.row(i));
        let a = hi.dot(&mi);
        g2 += (mi - hi * a).norm_squared();
    }
    g2.sqrt() / scale
}

/// Run `H_n = P(J H_{n-1})` from [`init_factor`].
///
/// Stops once both the relative objective change and the stationarity
/// residual are at most `tol_conv`. The objective alone converges roughly
/// quadratically faster than the factor, so it is not a safe stopping
/// signal on its own. Reaching `max_iters` returns the last iterate with
/// `converged = false`.
pub fn solve(j: &Coupling, cfg: &SolverConfig) -> Result<FactorState> {
    let (mut h, mut rng) = init_with_rng(j.len(), cfg)?;
    let mut m = &j.j * &h;
    let mut e = frob_inner(&h, &m);
    let mut history = vec![e];
    let mut stat = stationarity(&h, &m);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        h = project_rows(&m, &mut rng);
        m = &j.j * &h;
        let e_new = frob_inner(&h, &m);
        if e_new < e - MONOTONE_TOL * e_new.abs().max(e.abs()) {
            return Err(Error::Internal(format!(
                "objective decreased from {e:e} to {e_new:e} at iteration {iterations}; J is not p.s.d."
            )));
        }
        history.push(e_new);
        stat = stationarity(&h, &m);
        let delta = (e_new - e).abs();
        e = e_new;
        if delta <= cfg.tol_conv * e.abs().max(1.0) && stat <= cfg.tol_conv {
            converged = true;
            break;
        }
    }

    Ok(FactorState { h, objective: e, iterations, converged, stationarity: stat, history })
}
