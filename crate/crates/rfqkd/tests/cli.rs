//! CLI contract tests: exit codes, output formats, and input handling.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rfqkd")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn diag_table_csv(with_marginals: bool) -> String {
    let mut text = String::from("kind,x,y,value\n");
    for x in 1..=3 {
        for y in 1..=3 {
            let v = if x == y { -0.95 } else { 0.0 };
            text.push_str(&format!("E,{x},{y},{v}\n"));
        }
    }
    if with_marginals {
        for k in 1..=3 {
            text.push_str(&format!("MA,{k},,0.0\nMB,,{k},0.0\n"));
        }
    }
    text
}

#[test]
fn keyrates_from_correlator_table() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("table.csv"), diag_table_csv(true)).unwrap();
    let out = run_in(dir.path(), &["keyrates", "--input", "table.csv"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r_dd6 = doc["report"]["r_dd_6state"].as_f64().unwrap();
    assert!((r_dd6 - 0.7098).abs() < 1e-3, "r_dd6 = {r_dd6}");
    assert_eq!(doc["report"]["r_di1"].as_f64().unwrap(), -1.0);
    assert!((doc["s_max"].as_f64().unwrap() - 1.9).abs() < 1e-9);
    assert!((doc["c_max"].as_f64().unwrap() - 2.85).abs() < 1e-9);
    assert!(doc["tomography"].is_object());
    // spectrum of the reconstructed V=0.95 Werner state
    let top = doc["tomography"]["spectrum"][0].as_f64().unwrap();
    assert!((top - 0.9625).abs() < 1e-6, "top eigenvalue {top}");
}

#[test]
fn keyrates_without_marginals_skips_tomography_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("table.csv"), diag_table_csv(false)).unwrap();
    let out = run_in(dir.path(), &["keyrates", "--input", "table.csv"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["tomography"].is_null());
    assert!(doc["notices"][0].as_str().unwrap().contains("marginals"));
    // rates are still computed
    assert!(doc["report"]["r_dd"].as_f64().unwrap() > 0.0);
}

#[test]
fn keyrates_from_state_json_round_trips_through_own_parser() {
    let dir = tempfile::tempdir().unwrap();
    // obtain a state via tomography, feed it back in as a state input
    std::fs::write(dir.path().join("table.csv"), diag_table_csv(true)).unwrap();
    let tomo = run_in(dir.path(), &["tomography", "--input", "table.csv"]);
    assert!(tomo.status.success());
    std::fs::write(dir.path().join("state.json"), &tomo.stdout).unwrap();
    let out = run_in(dir.path(), &["keyrates", "--input", "state.json"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r_dd6 = doc["report"]["r_dd_6state"].as_f64().unwrap();
    assert!((r_dd6 - 0.7098).abs() < 1e-3, "r_dd6 = {r_dd6}");
}

#[test]
fn scan_lists_all_36_tuples() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("table.csv"), diag_table_csv(false)).unwrap();
    let out = run_in(dir.path(), &["scan", "--input", "table.csv"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["values"].as_array().unwrap().len(), 36);
    assert!(!doc["tsirelson_exceeded"].as_bool().unwrap());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // malformed input row
    std::fs::write(dir.path().join("bad.csv"), "kind,x,y,value\nE,1,1,huh\n").unwrap();
    let out = run_in(dir.path(), &["keyrates", "--input", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2"), "stderr: {msg}");
    // missing input file
    let out = run_in(dir.path(), &["keyrates", "--input", "nope.csv"]);
    assert_eq!(out.status.code(), Some(2));
    // bad simulate config
    let out = run_in(dir.path(), &["simulate", "--seed", "1", "--samples", "0"]);
    assert_eq!(out.status.code(), Some(2));
    // tomography without marginals
    std::fs::write(dir.path().join("table.csv"), diag_table_csv(false)).unwrap();
    let out = run_in(dir.path(), &["tomography", "--input", "table.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invariant_violations_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // an |E| > 1 entry violates a numerical invariant
    let text = diag_table_csv(false).replace("E,1,1,-0.95", "E,1,1,-1.5");
    std::fs::write(dir.path().join("bad.csv"), text).unwrap();
    let out = run_in(dir.path(), &["keyrates", "--input", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    // a non-PSD state matrix
    let state = r#"{"rho": [
        [[1.5,0],[0,0],[0,0],[0,0]],
        [[0,0],[0,0],[0,0],[0,0]],
        [[0,0],[0,0],[0,0],[0,0]],
        [[0,0],[0,0],[0,0],[-0.5,0]]]}"#;
    std::fs::write(dir.path().join("state.json"), state).unwrap();
    let out = run_in(dir.path(), &["keyrates", "--input", "state.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn drift_csv_has_73_windows_and_meta_echo() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["drift", "--seed", "7", "--minutes", "174", "--out", "w.csv"],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    assert_eq!(csv.lines().count(), 74); // header + 73 windows
    assert!(csv.starts_with(
        "window_index,t_start,t_end,s_max,c_max,r_di1,r_di2,r_dd6,r_bb84,r_dd"
    ));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("w.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["minutes"], 174);
    assert_eq!(meta["windows"], 73);
}

#[test]
fn randomized_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "randomized", "--seed", "9", "--runs", "17",
            "--format", "json", "--out", "runs.json",
        ],
    );
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("runs.json")).unwrap())
            .unwrap();
    assert_eq!(doc["config"]["seed"], 9);
    assert_eq!(doc["windows"].as_array().unwrap().len(), 17);
    for w in doc["windows"].as_array().unwrap() {
        assert!(w["r_dd"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn csv_floats_use_nine_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["randomized", "--seed", "3", "--runs", "2", "--out", "r.csv"],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    for field in row.split(',').skip(3) {
        // scientific notation with 8 fractional digits = 9 significant
        let (mantissa, _) = field.split_once('e').expect("scientific float");
        let frac = mantissa.split_once('.').map(|(_, f)| f.len()).unwrap_or(0);
        assert_eq!(frac, 8, "field {field}");
    }
}

#[test]
fn out_dir_env_var_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("from-env");
    let out = Command::new(bin())
        .current_dir(dir.path())
        .env("RFQKD_OUT_DIR", &out_dir)
        .args(["simulate", "--seed", "1", "--samples", "200", "--visibilities", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("histograms.csv").exists());
    assert!(out_dir.join("summary.json").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["master_seed"], 1);
    assert_eq!(summary["config"]["n_samples"], 200);
}

#[test]
fn failed_run_leaves_no_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["simulate", "--seed", "1", "--samples", "100", "--visibilities", "2.0"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}
