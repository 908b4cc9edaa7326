//! Diffusion-kernel SDP on a uniform grid of `[-1, 1]`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::certificate::check_optimality;
use crate::dataio::interval_node;
use crate::embed::{factor_to_embedding, EmbeddingResult};
use crate::error::{Error, Result};
use crate::kernel::PSD_TOL;
use crate::linalg;
use crate::sdp::{build_coupling, solve, SolverConfig};

#[derive(Debug, Clone)]
pub struct IntervalProblem {
    pub grid: Vec<f64>,
    pub sigma: f64,
    pub k: DMatrix<f64>,
}

/// Gaussian kernel on the grid with degrees taken as plain sums over the
/// grid nodes, then `K = D^{-1/2} k D^{-1/2} - e0 e0^T`.
pub fn build_interval_problem(n: usize, sigma: f64) -> Result<IntervalProblem> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("interval problem needs n >= 2, got {n}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let grid: Vec<f64> = (0..n).map(|i| interval_node(i, n)).collect();
    let s2 = sigma * sigma;
    let base = DMatrix::from_fn(n, n, |i, j| (-(grid[i] - grid[j]).powi(2) / s2).exp());
    let deg: Vec<f64> = (0..n).map(|i| base.row(i).sum()).collect();
    let vol: f64 = deg.iter().sum();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let s = (deg[i] * deg[j]).sqrt();
        base[(i, j)] / s - s / vol
    });

    if let Some(i) = (0..n).find(|&i| !(k[(i, i)] > 0.0)) {
        return Err(Error::Precondition(format!("K({i},{i}) is not strictly positive")));
    }
    let vals = linalg::sym_eigenvalues(&k)?;
    let (min, max) = (vals[0], vals[n - 1]);
    if min < -PSD_TOL * max.abs().max(1.0) {
        return Err(Error::NotPsd { min, max });
    }
    Ok(IntervalProblem { grid, sigma, k })
}

/// Deviation of each embedding coordinate from odd and even symmetry under
/// `x -> -x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParityResidual {
    /// `max_i |chi(x_i) + chi(-x_i)|`.
    pub odd: f64,
    /// `max_i |chi(x_i) - chi(-x_i)|`.
    pub even: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyReport {
    pub n: usize,
    pub sigma: f64,
    pub rank: usize,
    pub certified: bool,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub least_eigenvalues: Vec<f64>,
    pub slackness_residual: f64,
    /// Max deviation of `rho` from the sign solution; only for `sigma = 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_residual: Option<f64>,
    pub parity_residuals: Vec<ParityResidual>,
}

/// `max |rho(x,y) - sgn(x) sgn(y) sqrt(K(x,x) K(y,y))|` with `sgn(0) = 0`.
pub fn sign_residual(p: &IntervalProblem, rho: &DMatrix<f64>) -> f64 {
    let n = p.grid.len();
    let sgn = |x: f64| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
    let f: Vec<f64> = (0..n).map(|i| sgn(p.grid[i]) * p.k[(i, i)].sqrt()).collect();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((rho[(i, j)] - f[i] * f[j]).abs());
        }
    }
    worst
}

pub fn parity_residuals(xi: &DMatrix<f64>) -> Vec<ParityResidual> {
    let n = xi.nrows();
    (0..xi.ncols())
        .map(|l| {
            let mut r = ParityResidual { odd: 0.0, even: 0.0 };
            for i in 0..n {
                let (a, b) = (xi[(i, l)], xi[(n - 1 - i, l)]);
                r.odd = r.odd.max((a + b).abs());
                r.even = r.even.max((a - b).abs());
            }
            r
        })
        .collect()
}

/// Solve, certify and embed the interval problem.
pub fn run_interval_experiment(
    p: &IntervalProblem,
    cfg: &SolverConfig,
    rank_tol: f64,
) -> Result<(ToyReport, EmbeddingResult)> {
    let coupling = build_coupling(&p.k)?;
    let state = solve(&coupling, cfg)?;
    let e = factor_to_embedding(&p.k, &state.h, rank_tol)?;
    let cert = check_optimality(&p.k, &e.h_xi)?;
    let sign_residual = (p.sigma == 1.0).then(|| sign_residual(p, &e.rho()));
    let report = ToyReport {
        n: p.grid.len(),
        sigma: p.sigma,
        rank: e.rank,
        certified: cert.is_certified,
        converged: state.converged,
        iterations: state.iterations,
        objective: state.objective,
        least_eigenvalues: cert.least_eigenvalues,
        slackness_residual: cert.slackness_residual,
        sign_residual,
        parity_residuals: parity_residuals(&e.xi),
    };
    Ok((report, e))
}
