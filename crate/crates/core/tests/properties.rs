mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use common::{random_blobs, random_probe, solve_dataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdpmap::embed::{factor_to_embedding, DEFAULT_RANK_TOL};
use sdpmap::kernel::build;
use sdpmap::linalg;
use sdpmap::oos::extend_point;
use sdpmap::sdp::SolverConfig;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn diffusion_kernel_is_psd_with_zero_row_sums_against_sqrt_degrees(seed in 0u64..10_000) {
        let (ds, sigma) = random_blobs(seed);
        let dk = build(&ds, sigma).unwrap();
        let sd = dk.base.degrees.map(f64::sqrt);
        prop_assert!((&dk.k * &sd).amax() < 1e-12 * sd.amax());
        prop_assert!(dk.lambda_min >= -1e-10);
    }

    #[test]
    fn embedding_is_independent_of_factor_rotation(seed in 0u64..10_000, angle in 0.0f64..std::f64::consts::TAU) {
        let (ds, sigma) = random_blobs(seed);
        let (dk, s) = solve_dataset(&ds, sigma, &SolverConfig { r0: 3, seed, ..Default::default() });
        let (c, si) = (angle.cos(), angle.sin());
        let q = DMatrix::from_row_slice(3, 3, &[c, -si, 0.0, si, c, 0.0, 0.0, 0.0, 1.0]);
        let rotated = factor_to_embedding(&dk.k, &(&s.state.h * q), DEFAULT_RANK_TOL).unwrap();
        prop_assert_eq!(rotated.rank, s.e.rank);
        prop_assert!(linalg::max_abs(&(rotated.rho() - s.e.rho())) < 1e-12);
    }

    #[test]
    fn extended_points_lie_on_their_shell(seed in 0u64..10_000) {
        let (ds, sigma) = random_blobs(seed);
        let (dk, s) = solve_dataset(&ds, sigma, &SolverConfig { seed, ..Default::default() });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let p = extend_point(&dk, &s.e, &random_probe(&mut rng)).unwrap();
            let norm2: f64 = p.coords.iter().map(|v| v * v).sum();
            if p.degenerate {
                prop_assert_eq!(norm2, 0.0);
            } else {
                prop_assert!((norm2 - p.kappa).abs() <= 1e-12 * p.kappa.max(1e-300));
            }
        }
    }
}
