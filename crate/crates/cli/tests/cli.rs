use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn haltlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haltlab"))
        .args(args)
        .env_remove("HALTLAB_ENUM_CAP")
        .output()
        .unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = haltlab(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(args: &[&str]) -> Option<i32> {
    haltlab(args).status.code()
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn history_csv_is_golden() {
    let out = haltlab(&[
        "history",
        "--machine",
        "builtin:table1",
        "--length",
        "3",
        "--max-time",
        "17",
        "--format",
        "csv",
    ]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        golden("history_table1.csv")
    );
}

#[test]
fn probcurve_csv_is_golden() {
    let out = haltlab(&[
        "probcurve",
        "--machine",
        "builtin:prefix-free",
        "--lengths",
        "1..12",
        "--budget",
        "2000",
        "--format",
        "csv",
    ]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        golden("probcurve_prefix_free.csv")
    );
}

#[test]
fn table1_conditional() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/table1.json");
    let v = json(&[
        "history",
        "--machine",
        fixture,
        "--length",
        "3",
        "--max-time",
        "17",
        "--format",
        "json",
    ]);
    assert_eq!(
        v["result"]["conditional"]["eventual_given_not_by_t0"],
        "2/3"
    );
    assert_eq!(v["config"]["machine"], fixture);
}

#[test]
fn history_of_length_zero_has_one_row() {
    let v = json(&[
        "history",
        "--machine",
        "builtin:table1",
        "--length",
        "0",
        "--max-time",
        "4",
    ]);
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["program"], "");
    // λ never halts on this table, so nothing is conditioned away.
    assert_eq!(v["result"]["prob_eventual"], "0/1");
}

#[test]
fn threshold_and_decide_on_fixture_f() {
    let v = json(&["threshold", "--machine", "builtin:fixture-f", "--k", "3"]);
    assert_eq!(v["result"]["threshold"], 5);
    assert_eq!(v["result"]["upsilon"]["lo"], "5/8");

    let v = json(&[
        "decide",
        "--machine",
        "builtin:fixture-f",
        "--program",
        "",
        "--k",
        "3",
    ]);
    assert_eq!(v["result"]["verdict"], "HALTED at 1");

    let v = json(&[
        "decide",
        "--machine",
        "builtin:fixture-f",
        "--program",
        "1",
        "--k",
        "3",
    ]);
    let verdict = v["result"]["verdict"].as_str().unwrap();
    assert!(verdict.starts_with("probably non-halting"), "{verdict}");
    assert!(verdict.ends_with("< 2^-3 = 1/8"), "{verdict}");
    assert_eq!(v["result"]["tail"]["hi"], "0/1");
}

#[test]
fn density_echoes_theta() {
    let v = json(&["density", "--length", "3"]);
    assert_eq!(v["result"]["theta"], "2049");
    assert_eq!(v["result"]["c"], 2);
    assert_eq!(v["result"]["label"], "exact");
}

#[test]
fn probcurve_trend_on_prefix_free() {
    let v = json(&[
        "probcurve",
        "--machine",
        "builtin:prefix-free",
        "--lengths",
        "1..10",
        "--budget",
        "2000",
    ]);
    assert_eq!(v["result"]["tail_non_increasing"], true);
    assert_eq!(v["result"]["omega_below_one"], true);
}

#[test]
fn decompose_residual_below_an_eighth() {
    let v = json(&["decompose", "--k", "2", "--max-length", "8"]);
    assert_eq!(v["result"]["bound"], "1/8");
    assert_eq!(v["result"]["holds"], true);
}

#[test]
fn user_table_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let dist = write_temp(
        &dir,
        "w.json",
        r#"{"kind":"user-table","weights":[["3","4"],["3","16"]],"tail_modulus":{"type":"geometric","ratio":"1/4"}}"#,
    );
    let v = json(&[
        "threshold",
        "--machine",
        "builtin:universal-identity",
        "--distribution",
        &dist,
        "--k",
        "3",
    ]);
    assert_eq!(v["config"]["distribution"]["kind"], "user-table");
    assert_eq!(v["result"]["threshold"], v["result"]["tail_modulus"]);
    assert_eq!(v["result"]["holds"], true);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&["history", "--length", "3"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(
        code(&["density", "--length", "2", "--budget", "10"]),
        Some(2)
    );
    assert_eq!(code(&["probcurve", "--machine", "builtin:toy-vm"]), Some(2));
    assert_eq!(code(&["probcurve", "--lengths", "5..2"]), Some(2));
    assert_eq!(code(&["upsilon", "--machine", "builtin:nope"]), Some(2));
    assert_eq!(code(&["decide", "--program", "012", "--k", "2"]), Some(2));
    assert_eq!(code(&["--workers", "0", "upsilon"]), Some(2));
}

#[test]
fn resource_caps_exit_3() {
    let out = Command::new(env!("CARGO_BIN_EXE_haltlab"))
        .args([
            "history",
            "--machine",
            "builtin:table1",
            "--length",
            "5",
            "--max-time",
            "4",
        ])
        .env("HALTLAB_ENUM_CAP", "4")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(
        code(&[
            "upsilon",
            "--machine",
            "builtin:toy-vm",
            "--precision",
            "21"
        ]),
        Some(3)
    );
}

#[test]
fn degenerate_distribution_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_temp(&dir, "empty.json", r#"{"kind":"table","entries":[]}"#);
    assert_eq!(code(&["upsilon", "--machine", &empty]), Some(4));
    assert_eq!(
        code(&["decide", "--machine", &empty, "--program", "0", "--k", "1"]),
        Some(4)
    );
}

#[test]
fn threshold_when_everything_halts_at_once() {
    // Υ = 1, but its certified lower bound sits just below 1, so T(k) = k + 2
    // and the tail stays strictly below 2^-k.
    let dir = tempfile::tempdir().unwrap();
    let total = write_temp(&dir, "total.json", r#"{"kind":"total","stop_time":1}"#);
    let v = json(&["threshold", "--machine", &total, "--k", "2"]);
    assert_eq!(v["result"]["threshold"], 4);
    assert_eq!(v["result"]["upsilon"]["hi"], "1/1");
    assert_eq!(v["result"]["holds"], true);
}

#[test]
fn workers_do_not_change_output() {
    let args = [
        "history",
        "--machine",
        "builtin:toy-vm",
        "--length",
        "8",
        "--max-time",
        "300",
    ];
    let one = haltlab(&[&["--workers", "1"], &args[..]].concat());
    let many = haltlab(&[&["--workers", "8"], &args[..]].concat());
    assert_eq!(one.stdout, many.stdout);
    let v: Value = serde_json::from_slice(&one.stdout).unwrap();
    assert!(v["config"].get("workers").is_none());
}
