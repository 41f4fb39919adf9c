//! Black-box tests of the `transmed` binary: exit codes, output layout, and
//! the sample → estimate round trip.

use assert_cmd::Command;
use predicates::prelude::*;

fn transmed() -> Command {
    Command::cargo_bin("transmed").unwrap()
}

#[test]
fn truth_prints_report_and_is_stable() {
    let run = || {
        transmed()
            .args(["truth", "--dgm", "1", "--labeling", "appendix"])
            .assert()
            .success()
            .get_output()
            .stdout
            .clone()
    };
    let first = run();
    assert_eq!(first, run());
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    for key in ["sde", "sie", "eff_bound_sde", "eff_bound_sie"] {
        assert!(v.get(key).and_then(|x| x.as_f64()).is_some(), "missing {key}");
    }
}

#[test]
fn truth_rejects_unknown_dgm() {
    transmed().args(["truth", "--dgm", "4"]).assert().code(2);
}

#[test]
fn simulate_rejects_bad_scenario() {
    transmed()
        .args(["simulate", "--n", "100", "--reps", "2", "--scenario", "bogus"])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("scenario"));
}

#[test]
fn simulate_writes_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    transmed()
        .args([
            "simulate",
            "--dgm",
            "1",
            "--n",
            "300",
            "--reps",
            "3",
            "--boot",
            "0",
            "--seed",
            "5",
            "--threads",
            "1",
            "--out",
        ])
        .arg(dir.path())
        .assert()
        .success();
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("estimator,effect,bias,"));
    assert_eq!(summary.lines().count(), 11); // header + 5 estimators x 2 effects
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["seed"], 5);
}

#[test]
fn sample_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    transmed()
        .args(["sample", "--dgm", "1", "--n", "800", "--seed", "11", "--out"])
        .arg(&csv)
        .assert()
        .success();
    let out = transmed()
        .args(["estimate"])
        .arg(&csv)
        .args(["--dgm", "1", "--no-bootstrap", "--estimators", "tmle_eff,ee_eff"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        let sde = r["sde"]["estimate"].as_f64().unwrap();
        assert!(sde.is_finite() && sde.abs() <= 1.0);
        assert!(r["sde"]["se_boot"].is_null());
    }
}

#[test]
fn estimate_missing_file_is_config_error() {
    transmed()
        .args(["estimate", "/nonexistent/data.csv", "--dgm", "1", "--no-bootstrap"])
        .assert()
        .code(2);
}

#[test]
fn estimate_bootstrap_attaches_se() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    transmed()
        .args(["sample", "--dgm", "1", "--n", "500", "--seed", "3", "--out"])
        .arg(&csv)
        .assert()
        .success();
    let out = transmed()
        .args(["estimate"])
        .arg(&csv)
        .args(["--dgm", "1", "--boot", "20", "--seed", "9", "--estimators", "tmle_eff"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let se = v["results"][0]["sde"]["se_boot"].as_f64().unwrap();
    assert!(se > 0.0 && se < 1.0);
}
