use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirichlet-ball"))
        .args(args)
        .env("DIRICHLET_BALL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn norm_of_model_polynomial() {
    let v = json(&["norm", "--poly", "1-2*z*w", "--alpha", "0"]);
    assert_eq!(v["schema"], "dirichlet-ball/1");
    let got = v["result"]["norm_sq"].as_f64().unwrap();
    assert!((got - 5.0 / 3.0).abs() < 1e-14);
}

#[test]
fn classify_model_polynomial() {
    let v = json(&["classify", "--poly", "1-2*z*w", "--alpha", "1.5"]);
    assert_eq!(v["result"]["cyclic"], "yes");
    assert_eq!(v["result"]["rule"], "alpha_le_3_2");
    let notes = v["result"]["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n == "reducibility not verified"));
}

#[test]
fn zeros_of_nonvanishing_polynomial() {
    let v = json(&["zeros", "--poly", "2-z"]);
    assert_eq!(v["result"]["class"], "empty");
}

#[test]
fn identical_runs_are_byte_identical() {
    for args in [
        &["zeros", "--poly", "1-2*z*w", "--seed", "7"][..],
        &["classify", "--poly", "(1-z)*(1-w)", "--alpha", "2.5", "--seed", "3"][..],
        &["lojasiewicz", "--poly", "1-z", "--samples", "5000", "--seed", "11"][..],
    ] {
        let a = run(args);
        let b = run(args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn poly_json_round_trip() {
    let text = "1 - (0+1i)*z^2 + 0.25*z*w^3";
    let first = json(&["norm", "--poly", text, "--alpha", "1"]);
    let path = tmp("round_trip.json");
    std::fs::write(&path, serde_json::to_string(&first["result"]["p"]).unwrap()).unwrap();
    let arg = format!("@{}", path.display());
    let second = json(&["norm", "--poly", &arg, "--alpha", "1"]);
    assert_eq!(first["result"]["p"], second["result"]["p"]);
    assert_eq!(first["result"]["norm_sq"], second["result"]["norm_sq"]);
}

#[test]
fn csv_output_to_file() {
    let path = tmp("opa.csv");
    let out = run(&[
        "opa", "--poly", "1-z", "--alpha", "0", "--degree", "4", "--format", "csv", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,dist_sq,condition");
    assert_eq!(lines.len(), 6);
    let d0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((d0 - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn errors_exit_with_one() {
    let out = run(&["norm", "--poly", "2z"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("position 1"));

    let out = run(&["capacity", "--alpha", "2.5"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["opa", "--poly", "z^1.5", "--alpha", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn capacity_on_model_curve() {
    let v = json(&["capacity", "--alpha", "1.75", "--n", "64,128"]);
    assert_eq!(v["result"]["class"], "convergent");
    assert_eq!(v["result"]["energies"].as_array().unwrap().len(), 2);
}

#[test]
fn gamma_at_given_point() {
    let s = std::f64::consts::FRAC_1_SQRT_2.to_string();
    let point = format!("{s},0,{s},0");
    let v = json(&["gamma", "--poly", "1-2*z*w", "--point", &point]);
    let re = v["result"]["gamma"][0].as_f64().unwrap();
    assert!((re + 0.5).abs() < 1e-3, "{v}");
}
