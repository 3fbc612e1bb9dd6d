use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
[space]
kind = "line"
n = 64
length = 1.0

[grid]
k_max = 5

[random]
trials = 200
pi_trials = 2000

[tb]
probes = 50
cz_samples = 1000
ball_centers = 16
"#;

fn nhdyadic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhdyadic")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path.to_str().unwrap().to_owned()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn zero_kernel_tb_report_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "\n[kernel]\nkind = \"zero\"\n");
    let out = nhdyadic(&["tb-report", "--config", &cfg, "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["passed"], Value::Bool(true));
    let res = &r["results"];
    for key in ["bmo_tb1", "bmo_tt_b2", "rbmo_tb1", "wbp", "cz_b"] {
        assert_eq!(res[key].as_f64(), Some(0.0), "{key}");
    }
    assert_eq!(res["operator_norm"]["lower_bound"].as_f64(), Some(0.0));
}

#[test]
fn randgrid_verify_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let args = ["randgrid-verify", "--config", &cfg, "--seed", "7"];
    let first = nhdyadic(&args);
    let second = nhdyadic(&args);
    assert!(first.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(!first.stdout.is_empty());
    assert_eq!(first.stdout, second.stdout);
    let r = report(&first);
    for check in ["boundary", "bad", "uniform", "collapse"] {
        assert!(r["results"].get(check).is_some(), "{check} missing");
    }
}

#[test]
fn worker_count_does_not_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let one = nhdyadic(&["decay-verify", "--config", &cfg, "--seed", "3", "--workers", "1"]);
    let four = nhdyadic(&["decay-verify", "--config", &cfg, "--seed", "3", "--workers", "4"]);
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn haar_verify_reconstructs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = nhdyadic(&["haar-verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let res = &report(&out)["results"];
    assert!(res["telescoping_residual"].as_f64().unwrap() < 1e-10);
    assert!(res["max_relative_integral"].as_f64().unwrap() < 1e-10);
}

#[test]
fn out_directory_receives_report_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out_dir = dir.path().join("run");
    let out = nhdyadic(&["build-grid", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("build-grid.json")).unwrap()).unwrap();
    assert_eq!(r["subcommand"], "build-grid");
    assert!(r["delta_notice"].as_str().is_some_and(|s| !s.is_empty()));
    let system: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("system.json")).unwrap()).unwrap();
    assert!(system["generations"].as_array().is_some_and(|g| g.len() == 6));
}

#[test]
fn missing_seed_exits_with_config_error() {
    let out = nhdyadic(&["kernel-verify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn invalid_config_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = nhdyadic(&["build-grid", "--config", &cfg, "--delta", "0.9"]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\nunknown = 1\n").unwrap();
    let out = nhdyadic(&["build-grid", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = nhdyadic(&["build-grid", "--config", "/nonexistent/experiment.toml"]);
    assert_eq!(out.status.code(), Some(2));
}
