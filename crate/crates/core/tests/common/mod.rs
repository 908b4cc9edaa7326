#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sdpmap::certificate::{check_optimality, CertificateReport};
use sdpmap::dataio::Dataset;
use sdpmap::embed::{factor_to_embedding, EmbeddingResult, DEFAULT_RANK_TOL};
use sdpmap::kernel::{build, DiffusionKernel};
use sdpmap::sdp::{build_coupling, solve, FactorState, SolverConfig};

pub struct Solved {
    pub k: DMatrix<f64>,
    pub state: FactorState,
    pub e: EmbeddingResult,
    pub cert: CertificateReport,
}

pub fn solve_matrix(k: &DMatrix<f64>, cfg: &SolverConfig) -> Solved {
    let cfg = SolverConfig { r0: cfg.r0.min(k.nrows()), ..*cfg };
    let state = solve(&build_coupling(k).unwrap(), &cfg).unwrap();
    let e = factor_to_embedding(k, &state.h, DEFAULT_RANK_TOL).unwrap();
    let cert = check_optimality(k, &e.h_xi).unwrap();
    Solved { k: k.clone(), state, e, cert }
}

pub fn solve_dataset(ds: &Dataset, sigma: f64, cfg: &SolverConfig) -> (DiffusionKernel, Solved) {
    let dk = build(ds, sigma).unwrap();
    let s = solve_matrix(&dk.k, cfg);
    (dk, s)
}

/// A few tight Gaussian blobs in the plane, with a bandwidth drawn from [1, 3].
pub fn random_blobs(seed: u64) -> (Dataset, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 8 + (seed % 9) as usize;
    let blobs = 2 + (seed % 2) as usize;
    let centers: Vec<[f64; 2]> =
        (0..blobs).map(|_| [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)]).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let c = centers[i % blobs];
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            vec![c[0] + 0.4 * dx, c[1] + 0.4 * dy]
        })
        .collect();
    let sigma = rng.random_range(1.0..3.0);
    (Dataset::from_rows(&rows).unwrap(), sigma)
}

pub fn random_probe(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![rng.random_range(-1.0..5.0), rng.random_range(-1.0..5.0)]
}

pub fn line(id: &str, ok: bool, detail: impl std::fmt::Display) {
    println!("[{}] {id}: {detail}", if ok { "PASS" } else { "FAIL" });
}
