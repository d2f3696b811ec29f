use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn optspan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optspan")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn demo(dir: &Path) -> String {
    write(dir, "market.json", r#"{"probs":[0.3333333333333333,0.3333333333333333,0.33333333333333337],"underlying":[0,1,2]}"#)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn replicate_square_reaches_zero() {
    let dir = TempDir::new().unwrap();
    let market = demo(dir.path());
    let out_dir = dir.path().join("out");
    let out = optspan(&["replicate", "--market", &market, "--target", "square", "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("n,sup_err,L1_err,L2_err,Linf_err,pairing_max_err"));
    let last = csv.lines().last().unwrap();
    assert_eq!(last.split(',').nth(1), Some("0.0"));
    let port: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("portfolio.json")).unwrap()).unwrap();
    assert!(port.get("legs").is_some());
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 0);
    assert!(report["version"].is_string());
    assert!(report["tolerances"]["converged"].is_number());
}

#[test]
fn replicate_one_is_a_single_row() {
    let dir = TempDir::new().unwrap();
    let market = demo(dir.path());
    let out = optspan(&["replicate", "--market", &market, "--target", "one"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn replicate_non_measurable_exits_2_with_projection() {
    let dir = TempDir::new().unwrap();
    let market = write(dir.path(), "m.json", r#"{"probs":[0.25,0.25,0.25,0.25],"underlying":[0,1,1,2]}"#);
    let out_dir = dir.path().join("o");
    let out = optspan(&[
        "replicate", "--market", &market, "--target", "[0,1,2,2]", "--format", "json", "--out-dir", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let report = json(&out);
    assert_eq!(report["replicable"], false);
    assert_eq!(report["projection"], serde_json::json!([0.0, 1.5, 1.5, 2.0]));
    assert!(out_dir.join("convergence.csv").exists());
}

#[test]
fn malformed_market_names_the_field() {
    let dir = TempDir::new().unwrap();
    let market = write(dir.path(), "bad.json", r#"{"probs":[0.5,"x"],"underlying":[0,1]}"#);
    let out = optspan(&["replicate", "--market", &market, "--target", "square"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("probs[1]"), "{err}");

    let out = optspan(&["replicate", "--market", "/nonexistent.json", "--target", "square"]);
    assert_eq!(out.status.code(), Some(1));
    let out = optspan(&["replicate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn price_exit_codes() {
    let dir = TempDir::new().unwrap();
    let market = demo(dir.path());
    let pricing = write(dir.path(), "p.json", r#"{"bond":1.0,"calls":[{"k":0,"price":1.0},{"k":1,"price":0.3333333333333333}]}"#);
    let out = optspan(&["price", "--market", &market, "--pricing", &pricing, "--target", "square"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["p_min"].as_f64().unwrap() - 5.0 / 3.0).abs() < 1e-9);
    assert!((v["p_max"].as_f64().unwrap() - 5.0 / 3.0).abs() < 1e-9);
    assert_eq!(v["unique"], true);

    let tied = write(dir.path(), "m4.json", r#"{"probs":[0.25,0.25,0.25,0.25],"underlying":[0,1,1,2]}"#);
    let p4 = write(dir.path(), "p4.json", r#"{"bond":1.0,"calls":[{"k":0,"price":1.0},{"k":1,"price":0.25}]}"#);
    let out = optspan(&["price", "--market", &tied, "--pricing", &p4, "--target", "[0,1,2,2]"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["unique"], false);
    assert!(v["gap"].as_f64().unwrap() > 1e-6);

    let bad = write(dir.path(), "bad.json", r#"{"bond":1.0,"calls":[{"k":0,"price":1.0},{"k":1,"price":-0.1}]}"#);
    let out = optspan(&["price", "--market", &market, "--pricing", &bad, "--target", "square"]);
    assert_eq!(out.status.code(), Some(4));
    let v = json(&out);
    assert_eq!(v["free_lunch"], true);
    assert!(v["certificate"]["element"].is_array());
}

#[test]
fn verify_lemmas() {
    let dir = TempDir::new().unwrap();
    let market = demo(dir.path());
    for lemma in ["green-jarrow", "o-closed", "z-identity", "mode-agreement"] {
        let out = optspan(&["verify", "--market", &market, "--lemma", lemma, "--trials", "40", "--seed", "9"]);
        assert_eq!(out.status.code(), Some(0), "{lemma}: {}", String::from_utf8_lossy(&out.stdout));
        let v = json(&out);
        assert_eq!(v["lemma"], lemma);
        assert_eq!(v["passed"], true);
        assert_eq!(v["seed"], 9);
    }
    let out = optspan(&["verify", "--market", &market, "--lemma", "z-identity", "--strikes", "-1,0,0.5,1,2"]);
    assert_eq!(json(&out)["witnesses"].as_array().unwrap().len(), 5);

    let tied = write(dir.path(), "m4.json", r#"{"probs":[0.25,0.25,0.25,0.25],"underlying":[0,1,1,2]}"#);
    let out = optspan(&["verify", "--market", &tied, "--lemma", "o-closed", "--mutate"]);
    assert_ne!(out.status.code(), Some(0));
    assert_eq!(json(&out)["counterexample"]["cell"], serde_json::json!([1, 2]));

    let out = optspan(&["verify", "--market", &market, "--lemma", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("green-jarrow"));
}

#[test]
fn runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let market = demo(dir.path());
    let a = optspan(&["verify", "--market", &market, "--lemma", "o-closed", "--seed", "3", "--trials", "20"]);
    let b = optspan(&["verify", "--market", &market, "--lemma", "o-closed", "--seed", "3", "--trials", "20"]);
    assert_eq!(a.stdout, b.stdout);
}
