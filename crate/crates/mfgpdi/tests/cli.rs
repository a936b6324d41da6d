//! Black-box tests of the mfgpdi binary: exit codes, artifact layout, config
//! file precedence, and rerun determinism.

use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfgpdi"))
        .args(args)
        .output()
        .expect("binary should start")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("binary should exit on its own")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["reproduce", "--help"])), 0);
    assert_eq!(code(&run(&["solve", "--help"])), 0);
}

#[test]
fn reproduce_writes_artifacts_and_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["reproduce", "prop72", "--j", "1,2", "--n", "64", "--out", out];
    let first = run(&args);
    assert_eq!(code(&first), 0, "stderr: {}", stderr(&first));
    let csv_path = dir.path().join("prop72_parity.csv");
    assert!(csv_path.exists());
    assert!(dir.path().join("prop72_report.json").exists());
    let csv = fs::read(&csv_path).unwrap();
    assert_eq!(code(&run(&args)), 0);
    assert_eq!(csv, fs::read(&csv_path).unwrap(), "rerun changed the CSV");
}

#[test]
fn solve_writes_solution_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve", "--ham", "abs", "--reg", "my", "--lambda", "0.1", "--coupling", "identity",
        "--nu", "1", "--n", "64", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let csv = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,u,m,drift,config"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 65, "one row per mesh node");

    let text = fs::read_to_string(dir.path().join("diagnostics.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(summary["diagnostics"]["converged"], true);
    assert_eq!(summary["lambda"], 0.1);
    let hash = summary["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 16);
    for row in rows {
        assert!(row.ends_with(hash), "row missing the config hash: {row}");
    }
}

#[test]
fn exhausted_sweep_budget_exits_two_but_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve", "--ham", "abs", "--reg", "my", "--lambda", "0.1", "--coupling", "identity",
        "--n", "64", "--max-outer", "1", "--outer-tol", "1e-14",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("diagnostics.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(summary["diagnostics"]["converged"], false);
}

#[test]
fn usage_and_configuration_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["reproduce", "nope", "--out", out],
        vec!["rate", "nope", "--out", out],
        vec!["reproduce", "prop71"], // no output directory anywhere
        vec!["solve", "--ham", "abs", "--n", "8", "--out", out],
        vec!["solve", "--ham", "abs", "--reg", "my", "--out", out], // missing lambda
        vec!["solve", "--ham", "bogus", "--out", out],
        vec!["solve", "--ham", "abs", "--coupling", "bogus", "--out", out],
        vec!["solve", "--ham", "abs"], // missing required --out
        vec!["--frobnicate"],
        vec!["reproduce", "prop72", "--n", "not-a-number", "--out", out],
    ];
    for args in cases {
        let res = run(&args);
        assert_eq!(code(&res), 1, "args {args:?}, stderr: {}", stderr(&res));
    }
}

#[test]
fn config_file_supplies_the_run_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let file_out = dir.path().join("from-file");
    let flag_out = dir.path().join("from-flag");
    let cfg_path = dir.path().join("run.json");
    let cfg = serde_json::json!({
        "experiment": "prop72",
        "n": 64,
        "nu": 0.1,
        "js": [1, 2],
        "out": file_out,
    });
    fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let cfg_arg = cfg_path.to_str().unwrap();

    let res = run(&["reproduce", "prop72", "--config", cfg_arg]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    assert!(file_out.join("prop72_parity.csv").exists());

    let res = run(&[
        "reproduce", "prop72", "--config", cfg_arg,
        "--j", "3", "--out", flag_out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(flag_out.join("prop72_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["config"]["js"], serde_json::json!([3]));
    assert_eq!(report["config"]["n"], 64, "unflagged fields keep file values");
}

#[test]
fn rate_subcommand_writes_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "rate", "my", "--lambda", "0.25,0.125,0.0625", "--n", "64",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let csv = fs::read_to_string(dir.path().join("rate_my.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4, "header plus one row per lambda");
    assert!(dir.path().join("rate_my_report.json").exists());
}
