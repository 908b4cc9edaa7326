use sdpmap::sdp::SolverConfig;
use sdpmap::toy::{build_interval_problem, run_interval_experiment};

#[test]
fn sign_residual_does_not_grow_as_tolerance_tightens() {
    let p = build_interval_problem(200, 1.0).unwrap();
    let mut prev = f64::INFINITY;
    for tol in [1e-4, 1e-6, 1e-8, 1e-10, 1e-12] {
        let cfg = SolverConfig { tol_conv: tol, ..Default::default() };
        let (rep, _) = run_interval_experiment(&p, &cfg, 1e-6).unwrap();
        let r = rep.sign_residual.unwrap();
        println!("tol {tol:e}: sign residual {r:e}");
        assert!(r <= prev + 1e-15, "tol {tol:e}: {r:e} > {prev:e}");
        prev = r;
    }
    assert!(prev <= 1e-6);
}

#[test]
fn narrow_bandwidth_parity_is_stable_under_refinement() {
    for n in [101, 201, 401] {
        let (rep, _) = run_interval_experiment(&build_interval_problem(n, 0.1).unwrap(), &SolverConfig::default(), 1e-6).unwrap();
        assert_eq!(rep.rank, 2, "n={n}");
        assert!(rep.certified);
        assert!(rep.parity_residuals[0].odd <= 1e-6 && rep.parity_residuals[1].even <= 1e-6, "n={n}: {:?}", rep.parity_residuals);
    }
}

#[test]
fn report_serializes_with_optional_sign_residual() {
    let (rep, _) = run_interval_experiment(&build_interval_problem(30, 0.5).unwrap(), &SolverConfig::default(), 1e-6).unwrap();
    let v = serde_json::to_value(&rep).unwrap();
    assert!(v.get("sign_residual").is_none());
    for key in ["n", "sigma", "rank", "certified", "parity_residuals"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}
