//! Datasets: CSV loading, standardization, synthetic generators, and the
//! JSON embedding file.

use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point cloud of `N` points in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `N x d`, one point per row.
    pub points: DMatrix<f64>,
    pub labels: Option<Vec<i64>>,
    pub ids: Vec<String>,
}

impl Dataset {
    pub fn new(points: DMatrix<f64>, labels: Option<Vec<i64>>, ids: Vec<String>) -> Result<Self> {
        let (n, d) = points.shape();
        if n == 0 || d == 0 {
            return Err(Error::EmptyInput);
        }
        if let Some((pos, _)) = points.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            return Err(Error::NonFinite(format!("point {} coordinate {}", pos % n, pos / n)));
        }
        if ids.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: ids.len() });
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: l.len() });
            }
        }
        Ok(Self { points, labels, ids })
    }

    /// Dataset with ids `"0" .. "N-1"` and no labels.
    pub fn from_points(points: DMatrix<f64>) -> Result<Self> {
        let ids = (0..points.nrows()).map(|i| i.to_string()).collect();
        Self::new(points, None, ids)
    }

    /// Dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let d = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::RaggedRow { row: i + 1, expected: d, found: r.len() });
            }
        }
        Self::from_points(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Load a comma-separated file of reals. `label_column` (0-based) is parsed
/// as an integer label and excluded from the features.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: Option<usize>) -> Result<Dataset> {
    let file = fs::File::open(path)?;
    read_csv(file, has_header, label_column)
}

/// Same as [`load_csv`] for any reader.
pub fn read_csv<R: Read>(reader: R, has_header: bool, label_column: Option<usize>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut arity: Option<usize> = None;

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse { row, col: 0, msg: e.to_string() }
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(features.len() + 1);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match arity {
            None => arity = Some(record.len()),
            Some(a) if a != record.len() => {
                return Err(Error::RaggedRow { row: line, expected: a, found: record.len() });
            }
            _ => {}
        }
        if let Some(lc) = label_column {
            if lc >= record.len() {
                return Err(Error::Parse {
                    row: line,
                    col: lc + 1,
                    msg: format!("label column {} out of range for {} fields", lc, record.len()),
                });
            }
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_column {
                let label = parse_label(cell).ok_or_else(|| Error::Parse {
                    row: line,
                    col: c + 1,
                    msg: format!("label {cell:?} is not an integer"),
                })?;
                labels.push(label);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                col: c + 1,
                msg: format!("{cell:?} is not a real number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row: line, col: c + 1, msg: format!("{cell:?} is not finite") });
            }
            row.push(v);
        }
        features.push(row);
    }

    if features.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = features[0].len();
    if d == 0 {
        return Err(Error::Schema("no feature columns".into()));
    }
    let n = features.len();
    let points = DMatrix::from_fn(n, d, |i, j| features[i][j]);
    let ids = (0..n).map(|i| i.to_string()).collect();
    Dataset::new(points, label_column.map(|_| labels), ids)
}

fn parse_label(cell: &str) -> Option<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    let f: f64 = cell.parse().ok()?;
    (f.is_finite() && f.fract() == 0.0).then_some(f as i64)
}

/// Center each column and scale it to unit sample standard deviation.
/// Constant columns (and everything when `N < 2`) are only centered.
pub fn standardize(ds: &Dataset) -> Dataset {
    let (n, d) = ds.points.shape();
    let mut out = ds.points.clone();
    for j in 0..d {
        let col = ds.points.column(j);
        let mean = col.sum() / n as f64;
        let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let std = if n >= 2 {
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let constant = std <= 1e-12 * scale.max(f64::MIN_POSITIVE);
        for i in 0..n {
            let c = ds.points[(i, j)] - mean;
            out[(i, j)] = if constant { 0.0 } else { c / std };
        }
    }
    Dataset { points: out, labels: ds.labels.clone(), ids: ds.ids.clone() }
}

const CLUSTER_CENTERS: [[f64; 2]; 3] = [[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]];
const CLUSTER_STD: f64 = 0.5;

/// Three isotropic Gaussian blobs in the plane (labels 0, 1, 2) followed by
/// outliers drawn uniformly over the clusters' bounding box inflated by 50%
/// (label 3).
pub fn gen_three_clusters(n_per_cluster: usize, n_outliers: usize, seed: u64) -> Result<Dataset> {
    let total = 3 * n_per_cluster + n_outliers;
    if total == 0 {
        return Err(Error::InvalidArgument("three-cluster dataset needs at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, CLUSTER_STD).expect("valid std");
    let mut rows: Vec<[f64; 2]> = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for (label, c) in CLUSTER_CENTERS.iter().enumerate() {
        for _ in 0..n_per_cluster {
            rows.push([c[0] + normal.sample(&mut rng), c[1] + normal.sample(&mut rng)]);
            labels.push(label as i64);
        }
    }

    let (lo, hi) = if rows.is_empty() {
        let pad = 3.0 * CLUSTER_STD;
        ([-pad, -pad], [4.0 + pad, 3.5 + pad])
    } else {
        rows.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
            ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
        })
    };
    for _ in 0..n_outliers {
        let mut p = [0.0; 2];
        for k in 0..2 {
            let mid = 0.5 * (lo[k] + hi[k]);
            let half = 0.75 * (hi[k] - lo[k]);
            p[k] = mid + half * rng.random_range(-1.0..=1.0);
        }
        rows.push(p);
        labels.push(3);
    }

    let points = DMatrix::from_fn(total, 2, |i, j| rows[i][j]);
    let ids = (0..total).map(|i| i.to_string()).collect();
    Dataset::new(points, Some(labels), ids)
}

/// `n` equally spaced points on `[-1, 1]`, endpoints included.
pub fn gen_interval_grid(n: usize) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("interval grid needs n >= 2, got {n}")));
    }
    Dataset::from_points(DMatrix::from_fn(n, 1, |i, _| interval_node(i, n)))
}

/// Node `i` of the `n`-point grid on `[-1, 1]`.
pub fn interval_node(i: usize, n: usize) -> f64 {
    if i + 1 == n {
        1.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

/// Swiss roll in R^3, uniform in the unrolled parameters
/// `t in [1.5 pi, 4.5 pi)` and height `h in [0, 21)`.
pub fn gen_swiss_roll(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("swiss roll needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::zeros(n, 3);
    for i in 0..n {
        let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * rng.random::<f64>());
        let h = 21.0 * rng.random::<f64>();
        m[(i, 0)] = t * t.cos();
        m[(i, 1)] = h;
        m[(i, 2)] = t * t.sin();
    }
    Dataset::from_points(m)
}

/// Reproducibility metadata stored alongside an embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMetadata {
    pub sigma: f64,
    pub seed: u64,
    pub tol_conv: f64,
    pub max_iters: usize,
    pub r0: usize,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_rank_tol() -> f64 {
    1e-6
}

/// On-disk embedding: coordinates, retained singular values, metadata, and
/// optionally the training points needed to extend to new points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub ids: Vec<String>,
    /// `N x r`, one point per row.
    pub coordinates: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub metadata: EmbeddingMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_points: Option<Vec<Vec<f64>>>,
}

impl EmbeddingFile {
    pub fn validate(&self) -> Result<()> {
        let n = self.coordinates.len();
        if n == 0 {
            return Err(Error::Schema("no coordinates".into()));
        }
        if self.ids.len() != n {
            return Err(Error::Schema(format!("{} ids for {} coordinate rows", self.ids.len(), n)));
        }
        let r = self.coordinates[0].len();
        if r == 0 {
            return Err(Error::Schema("embedding rank must be at least 1".into()));
        }
        for (i, row) in self.coordinates.iter().enumerate() {
            if row.len() != r {
                return Err(Error::Schema(format!("coordinate row {i} has {} entries, expected {r}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("coordinate row {i} is not finite")));
            }
        }
        if self.singular_values.len() != r {
            return Err(Error::Schema(format!("{} singular values for rank {r}", self.singular_values.len())));
        }
        if let Some(tp) = &self.training_points {
            if tp.len() != n {
                return Err(Error::Schema(format!("{} training points for {n} coordinate rows", tp.len())));
            }
            let d = tp.first().map_or(0, |p| p.len());
            if d == 0 || tp.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
                return Err(Error::Schema("training points must be finite rows of equal length".into()));
            }
        }
        if !(self.metadata.sigma > 0.0) {
            return Err(Error::Schema("sigma must be positive".into()));
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.coordinates.first().map_or(0, |r| r.len())
    }

    pub fn coordinate_matrix(&self) -> DMatrix<f64> {
        let (n, r) = (self.coordinates.len(), self.rank());
        DMatrix::from_fn(n, r, |i, j| self.coordinates[i][j])
    }

    pub fn training_dataset(&self) -> Result<Dataset> {
        let tp = self
            .training_points
            .as_ref()
            .ok_or_else(|| Error::Schema("embedding file carries no training points".into()))?;
        let mut ds = Dataset::from_rows(tp)?;
        ds.ids = self.ids.clone();
        Ok(ds)
    }
}

pub fn save_embedding(e: &EmbeddingFile, path: impl AsRef<Path>) -> Result<()> {
    e.validate()?;
    let text = serde_json::to_string_pretty(e).map_err(|err| Error::Schema(err.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    let text = fs::read_to_string(path)?;
    let e: EmbeddingFile = serde_json::from_str(&text).map_err(|err| Error::Schema(err.to_string()))?;
    e.validate()?;
    Ok(e)
}
