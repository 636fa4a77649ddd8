#![allow(clippy::needless_range_loop)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn zerosum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerosum")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn error_code(out: &Output) -> String {
    let v: Value = serde_json::from_slice(out.stderr.trim_ascii()).expect("error object on stderr");
    assert!(v["detail"].is_string());
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn analyze_reproduces_three_plan_example() {
    let scenario = data("paper_example.json");
    let out = zerosum(&["analyze", "--scenario", scenario.to_str().unwrap()]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let expect = [[4.0, -0.6, -89.1], [-0.6, 3.0, 9.0], [-89.1, 9.0, 1991.25]];
    for i in 0..3 {
        for j in 0..3 {
            let got = v["sigma_full"][i][j].as_f64().unwrap();
            assert!((got - expect[i][j]).abs() < 1e-9);
        }
    }
    assert_eq!(v["mu_n"].as_f64().unwrap(), 0.0);
    assert_eq!(v["gradient"]["prop2_satisfied"], Value::Bool(true));
    assert_eq!(v["caps"]["binding"], serde_json::json!([true, false, false]));
}

#[test]
fn analyze_focal_override() {
    let dir = TempDir::new().unwrap();
    let s = write(
        &dir,
        "s.json",
        r#"{"label":"x","shares":[0.04,0.90,0.06],"lambda":[[4.0,-0.6],[-0.6,3.0]]}"#,
    );
    let out = zerosum(&["analyze", "--scenario", &s, "--focal", "0"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["focal_index"], 0);
    assert!((v["sigma_nn"].as_f64().unwrap() - 1991.25).abs() < 1e-9);
}

#[test]
fn validation_failures_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad_json = write(&dir, "bad.json", "{\"shares\": [0.5,");
    let out = zerosum(&["analyze", "--scenario", &bad_json]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "parse");

    let short = write(&dir, "short.json", r#"{"label":"x","shares":[0.5,0.3],"lambda":[[1.0]]}"#);
    let out = zerosum(&["analyze", "--scenario", &short]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "shares");

    let out = zerosum(&["analyze", "--scenario", "/nonexistent/file.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "io");
}

#[test]
fn sweep_outputs() {
    let dir = TempDir::new().unwrap();
    let scenario = data("paper_example.json");
    let scenario = scenario.to_str().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = zerosum(&["sweep", "--scenario", scenario, "--grid", "0.04:0.01:16", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "focal_share,sigma_nn,grad_1,grad_2");
    let sigma: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(sigma.len(), 16);
    assert!(sigma.windows(2).all(|w| w[1] > w[0]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));

    // one-point grid at the current share reproduces analyze's sigma_nn
    let out = zerosum(&["sweep", "--scenario", scenario, "--grid", "0.04:0.01:1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let analyzed: Value = serde_json::from_slice(&zerosum(&["analyze", "--scenario", scenario]).stdout).unwrap();
    assert_eq!(row[1].parse::<f64>().unwrap(), analyzed["sigma_nn"].as_f64().unwrap());
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn sweep_errors_exit_2() {
    let scenario = data("paper_example.json");
    let scenario = scenario.to_str().unwrap();
    let out = zerosum(&["sweep", "--scenario", scenario, "--grid", "0.01:0.04:5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "grid");
    let out = zerosum(&["sweep", "--scenario", scenario, "--grid", "0.5:0.1:5", "--policy", "single(1)"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "shares");
}

#[test]
fn simulate_is_reproducible_and_balanced() {
    let dir = TempDir::new().unwrap();
    let scenario = data("paper_example.json");
    let scenario = scenario.to_str().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let draws = dir.path().join("draws.csv");
    for (p, extra) in [(&a, true), (&b, false)] {
        let mut args = vec!["simulate", "--scenario", scenario, "--draws", "5000", "--seed", "1"];
        args.extend(["--dist", "shifted-exp", "--out", p.to_str().unwrap()]);
        if extra {
            args.extend(["--emit-draws", draws.to_str().unwrap()]);
        }
        assert!(zerosum(&args).status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(v["draw_count"], 5000);
    assert_eq!(v["distribution"], "shifted-exp");
    assert!(v["max_zero_sum_violation"].as_f64().unwrap() <= 1e-10);
    let text = fs::read_to_string(&draws).unwrap();
    assert_eq!(text.lines().next().unwrap(), "T_1,T_2,T_3");
    assert_eq!(text.lines().count(), 5001);

    let out = zerosum(&["simulate", "--scenario", scenario, "--draws", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn caps_from_scenario_and_csv() {
    let scenario = data("paper_example.json");
    let out = zerosum(&["caps", "--scenario", scenario.to_str().unwrap()]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["effective_caps"][1], 0.5);

    let csv = data("two_plan_caps.csv");
    let out = zerosum(&["caps", "--scenario", csv.to_str().unwrap(), "--caps", "0.5,0.5"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["effective_caps"], serde_json::json!([0.5, 0.125]));
    assert_eq!(v["binding"], serde_json::json!([false, true]));

    let out = zerosum(&["caps", "--scenario", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = zerosum(&["caps", "--scenario", csv.to_str().unwrap(), "--caps", "0.5,-1"]);
    assert_eq!(error_code(&out), "value");
}

#[test]
fn find_examples_output_revalidates() {
    let out = zerosum(&["find-examples", "--plans", "3", "--count", "5", "--seed", "42"]);
    assert!(out.status.success());
    let raws: Vec<zerosum::RawScenario> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(raws.len(), 5);
    for raw in &raws {
        let sc = zerosum::validate_scenario(raw).unwrap();
        assert!(zerosum::check_prop2(&sc.shares, &sc.lambda).unwrap().satisfied);
    }
    let direct = zerosum::find_prop2_examples(3, 5, 42).unwrap();
    for (raw, sc) in raws.iter().zip(&direct) {
        assert_eq!(&zerosum::validate_scenario(raw).unwrap(), sc);
    }
}
