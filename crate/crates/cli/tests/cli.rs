use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdpmap::dataio::{gen_three_clusters, Dataset};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdpmap"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_csv(ds: &Dataset, path: &Path) {
    let mut s = String::from("x,y\n");
    for i in 0..ds.len() {
        let p = ds.point(i);
        s.push_str(&format!("{:?},{:?}\n", p[0], p[1]));
    }
    fs::write(path, s).unwrap();
}

fn clusters_csv(dir: &Path) -> PathBuf {
    let path = dir.join("clusters.csv");
    write_csv(&gen_three_clusters(30, 3, 0).unwrap(), &path);
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn embed(dir: &Path, input: &Path, out: &str, extra: &[&str]) -> Output {
    let out = dir.join(out);
    let mut args = vec!["embed", input.to_str().unwrap(), "--header", "--sigma", "3", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn embed_certifies_clusters_at_rank_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = clusters_csv(dir.path());
    let o = embed(dir.path(), &input, "a", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let e = read_json(&dir.path().join("a/embedding.json"));
    assert_eq!(e["coordinates"][0].as_array().unwrap().len(), 2);
    assert_eq!(e["metadata"]["sigma"], 3.0);
    assert_eq!(e["training_points"].as_array().unwrap().len(), 93);
    let c = read_json(&dir.path().join("a/certificate.json"));
    assert_eq!(c["certificate"]["is_certified"], true);
    assert_eq!(c["rank"], 2);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = clusters_csv(dir.path());
    assert_eq!(code(&embed(dir.path(), &input, "a", &["--seed", "5"])), 0);
    assert_eq!(code(&embed(dir.path(), &input, "b", &["--seed", "5"])), 0);
    for f in ["embedding.json", "embedding.csv", "certificate.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn malformed_csv_is_an_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "x,y\n1,2\n3,abc\n").unwrap();
    let o = embed(dir.path(), &input, "a", &[]);
    assert_eq!(code(&o), 1);
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("embed") && msg.contains("row 3") && msg.contains("column 2"), "{msg}");
}

#[test]
fn one_iteration_is_reported_unconverged() {
    let dir = tempfile::tempdir().unwrap();
    let input = clusters_csv(dir.path());
    assert_eq!(code(&embed(dir.path(), &input, "a", &["--max-iters", "1"])), 2);
    let c = read_json(&dir.path().join("a/certificate.json"));
    assert_eq!(c["converged"], false);
}

#[test]
fn certify_accepts_stored_and_rejects_scaled_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let input = clusters_csv(dir.path());
    assert_eq!(code(&embed(dir.path(), &input, "a", &[])), 0);
    let stored = dir.path().join("a/embedding.json");
    let out = dir.path().join("c");
    assert_eq!(code(&run(&["certify", stored.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);

    let mut e = read_json(&stored);
    for row in e["coordinates"].as_array_mut().unwrap() {
        for v in row.as_array_mut().unwrap() {
            *v = Value::from(v.as_f64().unwrap() * 1.5);
        }
    }
    let bad = dir.path().join("scaled.json");
    fs::write(&bad, serde_json::to_string(&e).unwrap()).unwrap();
    let o = run(&["certify", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasibility"));
}

#[test]
fn extend_reproduces_training_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let input = clusters_csv(dir.path());
    assert_eq!(code(&embed(dir.path(), &input, "a", &[])), 0);
    let stored = dir.path().join("a/embedding.json");
    let out = dir.path().join("x");
    let o = run(&["extend", stored.to_str().unwrap(), input.to_str().unwrap(), "--header", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let e = read_json(&stored);
    let text = fs::read_to_string(out.join("extension.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "id,xi1,xi2,kappa,degenerate");
    for (i, l) in lines.enumerate() {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[4], "false");
        for c in 0..2 {
            let stored = e["coordinates"][i][c].as_f64().unwrap();
            assert!((f[c + 1].parse::<f64>().unwrap() - stored).abs() < 1e-8);
        }
    }
}

#[test]
fn two_point_extension_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("two.csv");
    fs::write(&train, "0\n1\n").unwrap();
    let out = dir.path().join("a");
    let o = run(&["embed", train.to_str().unwrap(), "--sigma", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let new = dir.path().join("new.csv");
    fs::write(&new, "-0.5\n").unwrap();
    let x = dir.path().join("x");
    let o = run(&["extend", out.join("embedding.json").to_str().unwrap(), new.to_str().unwrap(), "--out", x.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(x.join("extension.csv")).unwrap();
    let v: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((v.abs() - 0.8988).abs() < 1e-4, "{v}");
}

#[test]
fn extend_rejects_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let input = clusters_csv(dir.path());
    assert_eq!(code(&embed(dir.path(), &input, "a", &[])), 0);
    let new = dir.path().join("new.csv");
    fs::write(&new, "1,2,3\n").unwrap();
    let out = dir.path().join("x");
    let o = run(&["extend", dir.path().join("a/embedding.json").to_str().unwrap(), new.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn compare_writes_both_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let input = clusters_csv(dir.path());
    let out = dir.path().join("m");
    let o = run(&["compare", input.to_str().unwrap(), "--header", "--sigma", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c = read_json(&out.join("compare.json"));
    let ev: Vec<f64> = c["diffusion_eigenvalues"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(ev.len(), 6);
    assert!(ev[1] > 0.8 && ev[2] > 0.8 && ev[3] < ev[2] - 0.2, "{ev:?}");
    assert_eq!(c["sdp_rank"], 2);
    let dm = fs::read_to_string(out.join("diffmap.csv")).unwrap();
    assert_eq!(dm.lines().next().unwrap(), "id,psi1,psi2");
    assert_eq!(dm.lines().count(), 94);
    assert!(out.join("embedding.json").exists());
}

#[test]
fn compare_on_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("two.csv");
    fs::write(&train, "0\n1\n").unwrap();
    let out = dir.path().join("m");
    let o = run(&["compare", train.to_str().unwrap(), "--sigma", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out.join("compare.json"))["sdp_rank"], 1);
    let dm = fs::read_to_string(out.join("diffmap.csv")).unwrap();
    assert_eq!(dm.lines().next().unwrap(), "id,psi1");
}

#[test]
fn toy_unit_bandwidth_on_even_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = run(&["toy", "--n", "200", "--sigma", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = read_json(&out.join("toy_report.json"));
    assert_eq!(r["rank"], 1);
    assert!(r["sign_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn invalid_tolerance_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = clusters_csv(dir.path());
    assert_eq!(code(&embed(dir.path(), &input, "a", &["--tol", "0"])), 1);
}
