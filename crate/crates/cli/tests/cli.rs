use std::process::{Command, Output};

use serde_json::Value;

fn wassbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wassbound")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn bound_example() {
    let out = wassbound(&["bound", "--H", "0.5", "--q", "2", "--times", "0,1,2", "--n", "100"]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["command"], "bound");
    assert_eq!(report["config"]["times"], serde_json::json!([0.0, 1.0, 2.0]));
    let bound = report["result"]["bound"].as_f64().unwrap();
    assert!((bound - 0.282_842_7).abs() < 1e-7);
}

#[test]
fn times_without_origin_get_zero_prepended() {
    let a = json(&wassbound(&["bound", "--H", "0.6", "--n", "50", "--times", "1,2"]));
    let b = json(&wassbound(&["bound", "--H", "0.6", "--n", "50", "--times", "0,1,2"]));
    assert_eq!(a, b);
}

#[test]
fn hypothesis_violation_exits_3() {
    let out = wassbound(&["bound", "--H", "0.9", "--q", "2", "--n", "100"]);
    assert_eq!(out.status.code(), Some(3));
    let err = json(&out);
    assert_eq!(err["error"]["kind"], "numerical");
    assert!(err["error"]["message"].as_str().unwrap().contains("0.75"));
}

#[test]
fn non_pd_target_exits_3() {
    let out = wassbound(&["bound", "--H", "0.5", "--n", "10", "--C", "[[1,2],[2,1]]"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &["bound", "--H", "0.5"][..],
        &["bound", "--H", "0.5", "--n", "10", "--bogus"],
        &["rates", "--H", "0.5", "--n", "256,128,512"],
        &["bound", "--H", "0.5", "--n", "10", "--C", "[[1,0,0],[0,1,0],[0,0,1]]"],
        &["replay", "/nonexistent/report.json"],
        &["frobnicate"],
    ] {
        let out = wassbound(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(json(&out)["error"]["kind"].is_string());
    }
}

#[test]
fn help_exits_0() {
    assert!(wassbound(&["--help"]).status.success());
    assert!(wassbound(&["bound", "--help"]).status.success());
}

#[test]
fn rates_reports_fit() {
    let out = wassbound(&["rates", "--H", "0.5", "--q", "2", "--n", "128,256,512,1024"]);
    let r = json(&out)["result"].clone();
    assert!((r["fit"]["slope"].as_f64().unwrap() + 0.5).abs() < 1e-6);
    assert_eq!(r["rate_exponent"].as_f64(), Some(-0.5));
    assert_eq!(r["curve"].as_array().unwrap().len(), 4);
}

#[test]
fn matrix_file_and_samples_dump() {
    let dir = tempfile::tempdir().unwrap();
    let matrices = dir.path().join("m.json");
    std::fs::write(&matrices, r#"{"C": [[2.0, 0.0], [0.0, 1.0]], "K": {"dim": 2, "rows": [[1.0, 0.0], [0.0, 1.0]]}}"#)
        .unwrap();
    let out = wassbound(&["gaussian-pair", "--matrix-file", matrices.to_str().unwrap(), "--m", "64"]);
    assert!(out.status.success());
    let r = json(&out)["result"].clone();
    assert!((r["bound"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let csv = dir.path().join("s.csv");
    let out = wassbound(&["simulate", "--H", "0.6", "--n", "64", "--m", "10", "--dump-samples", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn stein_check_defaults_to_registered_functions() {
    let out = wassbound(&["stein-check", "--grid-points", "3"]);
    let r = json(&out)["result"].clone();
    assert_eq!(r["pass"], true);
    assert_eq!(r["diagnostics"].as_array().unwrap().len(), 6);
}

#[test]
fn chatterjee_defaults_to_identity() {
    let out = wassbound(&["chatterjee", "--d", "2", "--m", "20", "--C", "[[2,0],[0,1]]"]);
    let r = json(&out)["result"].clone();
    assert_eq!(r["function"], "identity");
    assert!((r["bound"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-9);
}
