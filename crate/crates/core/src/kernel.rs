//! Gaussian base kernel, degrees, and the diffusion kernel
//! `K = D^{-1/2} k D^{-1/2} - e0 e0^T`.

use nalgebra::{DMatrix, DVector};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

/// Relative p.s.d. tolerance on the diffusion kernel spectrum.
pub const PSD_TOL: f64 = 1e-10;
/// Largest negative `kappa` treated as rounding and clamped to zero.
pub const KAPPA_CLAMP: f64 = 1e-12;

/// Gaussian Gram matrix over the training points with degrees and volume.
#[derive(Debug, Clone)]
pub struct BaseKernelState {
    pub sigma: f64,
    pub gram: DMatrix<f64>,
    pub degrees: DVector<f64>,
    pub volume: f64,
    /// `N x d`, one training point per row.
    pub training_points: DMatrix<f64>,
    sq_norms: Vec<f64>,
}

impl BaseKernelState {
    pub fn len(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.gram.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.training_points.ncols()
    }

    /// `k(x, x_i)` for every training point, evaluated exactly as the Gram
    /// entries are so that training points reproduce their Gram rows.
    pub fn kernel_row(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("extension point".into()));
        }
        let xn = dot(x.iter(), x.iter());
        let inv = 1.0 / (self.sigma * self.sigma);
        let mut row = DVector::zeros(self.len());
        for i in 0..self.len() {
            let p = self.training_points.row(i);
            let d2 = sq_dist(xn, self.sq_norms[i], dot(x.iter(), p.iter()));
            if !d2.is_finite() {
                return Err(Error::NonFinite(format!("distance to training point {i}")));
            }
            row[i] = (-d2 * inv).exp();
        }
        Ok(row)
    }
}

fn dot<'a>(a: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>) -> f64 {
    a.zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(xn: f64, yn: f64, xy: f64) -> f64 {
    (xn + yn - 2.0 * xy).max(0.0)
}

/// `k(x, y) = exp(-|x - y|^2 / sigma^2)` over all pairs of training points.
pub fn gaussian_gram(ds: &Dataset, sigma: f64) -> Result<BaseKernelState> {
    gaussian_gram_points(&ds.points, sigma)
}

/// [`gaussian_gram`] on a raw `N x d` point matrix.
pub fn gaussian_gram_points(points: &DMatrix<f64>, sigma: f64) -> Result<BaseKernelState> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive and finite, got {sigma}")));
    }
    let (n, d) = points.shape();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput);
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| points.row(i).iter().copied().collect()).collect();
    let sq_norms: Vec<f64> = rows.iter().map(|r| dot(r.iter(), r.iter())).collect();
    let inv = 1.0 / (sigma * sigma);
    let mut gram = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = sq_dist(sq_norms[i], sq_norms[j], dot(rows[i].iter(), rows[j].iter()));
            if !d2.is_finite() {
                return Err(Error::NonFinite(format!("distance between points {i} and {j}")));
            }
            let v = (-d2 * inv).exp();
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let degrees = DVector::from_fn(n, |i, _| gram.row(i).iter().sum::<f64>());
    let volume = degrees.iter().sum();
    Ok(BaseKernelState { sigma, gram, degrees, volume, training_points: points.clone(), sq_norms })
}

/// The diffusion kernel and the base state it was built from.
#[derive(Debug, Clone)]
pub struct DiffusionKernel {
    pub k: DMatrix<f64>,
    /// `sqrt(d / vol)`, the top eigenvector of the normalized kernel.
    pub e0: DVector<f64>,
    pub base: BaseKernelState,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl DiffusionKernel {
    pub fn len(&self) -> usize {
        self.k.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.k.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }
}

/// `K(i,j) = k(x_i,x_j)/sqrt(d_i d_j) - sqrt(d_i d_j)/vol`.
///
/// The spectrum is checked against `PSD_TOL` relative to `max(lambda_max, 1)`:
/// `K` is a rank-one deflation of a matrix with spectral radius one, so that
/// is the scale rounding errors live on.
pub fn diffusion_kernel(base: &BaseKernelState) -> Result<DiffusionKernel> {
    let n = base.len();
    let d = &base.degrees;
    let vol = base.volume;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s = (d[i] * d[j]).sqrt();
            let v = base.gram[(i, j)] / s - s / vol;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let e0 = DVector::from_fn(n, |i, _| (base.degrees[i] / vol).sqrt());
    let values = linalg::sym_eigenvalues(&k)?;
    let (lambda_min, lambda_max) = (values[0], values[n - 1]);
    if lambda_min < -PSD_TOL * lambda_max.abs().max(1.0) {
        return Err(Error::NotPsd { min: lambda_min, max: lambda_max });
    }
    Ok(DiffusionKernel { k, e0, base: base.clone(), lambda_min, lambda_max })
}

/// Gram, degrees and diffusion kernel in one call.
pub fn build(ds: &Dataset, sigma: f64) -> Result<DiffusionKernel> {
    diffusion_kernel(&gaussian_gram(ds, sigma)?)
}

/// Row of the diffusion kernel extended to a new point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionRow {
    /// `K(xbar, x_i)` for every training point.
    pub kvec: DVector<f64>,
    /// `K(xbar, xbar)`.
    pub kappa: f64,
    /// Extended degree `sum_i k(xbar, x_i)`.
    pub dbar: f64,
}

/// Extend `K` to `xbar` through the extended degree.
///
/// Fails if `xbar` is so far from every training point that all kernel
/// values underflow, since the extended degree is then zero.
pub fn extension_row(dk: &DiffusionKernel, xbar: &[f64]) -> Result<ExtensionRow> {
    let base = &dk.base;
    let kx = base.kernel_row(xbar)?;
    let dbar: f64 = kx.iter().sum();
    if !(dbar > 0.0) {
        return Err(Error::InvalidArgument(
            "extension point is too far from the training set: extended degree underflows to zero".into(),
        ));
    }
    let vol = base.volume;
    let kvec = DVector::from_fn(base.len(), |i, _| {
        let s = (dbar * base.degrees[i]).sqrt();
        kx[i] / s - s / vol
    });
    let mut kappa = 1.0 / dbar - dbar / vol;
    if kappa < 0.0 {
        if kappa < -KAPPA_CLAMP {
            return Err(Error::Internal(format!("negative extended diagonal {kappa:e}")));
        }
        kappa = 0.0;
    }
    Ok(ExtensionRow { kvec, kappa, dbar })
}

/// Outcome of checking `d(x)^2 <= k(x,x) vol` on training points and probes.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeReport {
    /// Smallest `(k(x,x) vol - d(x)^2) / (k(x,x) vol)` over training points.
    pub worst_training_slack: f64,
    /// Same over the probes, `None` when there are none.
    pub worst_probe_slack: Option<f64>,
    /// Training point indices violating the bound.
    pub training_violations: Vec<usize>,
    /// Probe indices violating the bound.
    pub probe_violations: Vec<usize>,
    pub passed: bool,
}

pub fn check_volume_inequalities(base: &BaseKernelState, probes: &[Vec<f64>]) -> Result<VolumeReport> {
    const TOL: f64 = 1e-12;
    let vol = base.volume;
    let slack = |d: f64, kxx: f64| (kxx * vol - d * d) / (kxx * vol);

    let mut worst_training_slack = f64::INFINITY;
    let mut training_violations = Vec::new();
    for i in 0..base.len() {
        let s = slack(base.degrees[i], base.gram[(i, i)]);
        worst_training_slack = worst_training_slack.min(s);
        if s < -TOL {
            training_violations.push(i);
        }
    }

    let mut worst_probe_slack: Option<f64> = None;
    let mut probe_violations = Vec::new();
    for (p, x) in probes.iter().enumerate() {
        let dbar: f64 = base.kernel_row(x)?.iter().sum();
        let s = slack(dbar, 1.0);
        worst_probe_slack = Some(worst_probe_slack.map_or(s, |w| w.min(s)));
        if s < -TOL {
            probe_violations.push(p);
        }
    }

    let passed = training_violations.is_empty() && probe_violations.is_empty();
    Ok(VolumeReport { worst_training_slack, worst_probe_slack, training_violations, probe_violations, passed })
}
