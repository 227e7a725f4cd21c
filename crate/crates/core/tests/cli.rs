use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resgreedy"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

const THREE_PARAM: &str = r#"{
  "family": {
    "grid": {"dim": "line", "cells": 2},
    "bounds": [0.1, 10.0],
    "generator": {"type": "affine_reciprocal", "base": [1.0, 1.0], "modes": [[1.0, 0.0]]},
    "parameters": {"type": "list", "points": [[0.0], [0.5], [1.0]]}
  }
}"#;

#[test]
fn greedy_three_parameter_decay_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "g.json", THREE_PARAM);
    let out = dir.path().join("out");
    let o = run(&["greedy"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("decay.csv")).unwrap();
    let rows: Vec<(usize, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (n, d) = l.split_once(',').unwrap();
            (n.parse().unwrap(), d.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], (0, 2.0));
    assert!((rows[1].1 - 1.0 / 3.0).abs() < 1e-12);
    assert!(rows[2].1.abs() < 1e-12);
    let res = json(&out.join("greedy_result.json"));
    assert_eq!(res["result"]["snapshots"], serde_json::json!([[1.0], [0.0]]));
}

#[test]
fn empty_parameter_grid_is_config_error() {
    let dir = TempDir::new().unwrap();
    let text = THREE_PARAM.replace("[[0.0], [0.5], [1.0]]", "[]");
    let cfg = write(dir.path(), "g.json", &text);
    let o = run(&["greedy"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").join("greedy_result.json").exists());
}

#[test]
fn unknown_key_reports_path() {
    let dir = TempDir::new().unwrap();
    let text = THREE_PARAM.replace("\"bounds\"", "\"bonds\": 1, \"bounds\"");
    let cfg = write(dir.path(), "g.json", &text);
    let o = run(&["greedy"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("family") && err.contains("bonds"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "g.json", THREE_PARAM);
    let o = run(&["verify", "nonsense"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = bin().arg("greedy").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["greedy"], &dir.path().join("missing.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn theorem1_constants_pass_with_exact_ratios() {
    let dir = TempDir::new().unwrap();
    let o = run(&["verify", "theorem1"], &repo_config("theorem1_constants.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&dir.path().join("theorem1_report.json"));
    assert_eq!(rep["passed"], Value::Bool(true));
    for level in rep["pairs"][0]["levels"].as_array().unwrap() {
        assert!((f(&level["d_inf"]) - 1.0).abs() < 1e-15);
        assert!((f(&level["d_r"]) - 0.5).abs() < 1e-8);
        assert!((f(&level["lower_ratio"]) - 0.5).abs() < 1e-8);
        assert!((f(&level["upper_ratio"]) - 0.5).abs() < 1e-8);
    }
    let csv = fs::read_to_string(dir.path().join("theorem1_refinement.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("pair,h,d_R_h,deficit"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn norm_identity_two_cells() {
    let dir = TempDir::new().unwrap();
    let o = run(&["verify", "norm-identity"], &repo_config("norm_identity.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rep = json(&dir.path().join("norm_identity_report.json"));
    let s = &rep["samples"][0];
    assert_eq!(f(&s["exact"]), 3.0);
    assert!(f(&s["ratio"]) >= 0.99);
}

#[test]
fn density_constant_one_has_equality_structure() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "d.json",
        r#"{"dim": 2, "subdivisions": 8, "rho": {"type": "constant", "value": 1.0}}"#,
    );
    let o = run(&["verify", "density"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&dir.path().join("out/density_report.json"));
    let sw = &rep["samples"][0]["sandwich"];
    assert!((f(&sw["norm_r_rho"]) - f(&sw["norm_r"])).abs() < 1e-9 * f(&sw["norm_r"]));
    assert!((f(&sw["lower"]) - 1.0).abs() < 1e-9);
    assert!(f(&sw["upper"]) >= 1.0);
}

#[test]
fn surrogate_and_operator_identity_configs_pass() {
    for (check, cfg, file) in [
        ("surrogate", "surrogate.json", "surrogate_report.json"),
        ("operator-identity", "operator_identity.json", "operator_identity_report.json"),
        ("density", "density.json", "density_report.json"),
    ] {
        let dir = TempDir::new().unwrap();
        let o = run(&["verify", check], &repo_config(cfg), dir.path());
        assert_eq!(o.status.code(), Some(0), "{check}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(json(&dir.path().join(file))["passed"], Value::Bool(true));
    }
}

fn greedy_basis(dir: &Path, rows: &str) -> PathBuf {
    let count = rows.matches("],").count() + 1;
    let points: Vec<String> = (0..count).map(|i| format!("[{i}]")).collect();
    let points = points.join(", ");
    let text = format!(
        r#"{{"family": {{"grid": {{"dim": "line", "cells": 2}}, "bounds": [0.1, 10.0],
            "generator": {{"type": "table", "points": [{points}], "rows": {rows}}}}}}}"#
    );
    let cfg = write(dir, "basis.json", &text);
    let out = dir.join("basis");
    let o = run(&["greedy"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("greedy_result.json")
}

fn online(dir: &Path, basis: &Path, tau: &str) -> Value {
    let text = format!(
        r#"{{"basis": {basis:?}, "tau": {{"type": "values", "grid": {{"dim": "line", "cells": 2}}, "values": {tau}}},
            "source": {{"type": "constant", "value": 1.0}}}}"#
    );
    let cfg = write(dir, "online.json", &text);
    let out = dir.join("online");
    let o = run(&["online"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("online_approx.csv").exists());
    assert!(out.join("online_direct.csv").exists());
    json(&out.join("online_report.json"))
}

#[test]
fn online_examples() {
    let dir = TempDir::new().unwrap();
    let basis = greedy_basis(dir.path(), "[[1.0, 0.5], [2.0, 1.5]]");

    // τ equal to the first snapshot
    let res = json(&basis);
    let first = res["result"]["basis"][0]["values"].to_string();
    let rep = online(dir.path(), &basis, &first);
    assert_eq!(f(&rep["max_derivative_error"]), 0.0);
    assert_eq!(f(&rep["surrogate_err"]), 0.0);
    let approx = fs::read_to_string(dir.path().join("online/online_approx.csv")).unwrap();
    let direct = fs::read_to_string(dir.path().join("online/online_direct.csv")).unwrap();
    assert_eq!(approx, direct);

    // 1/τ = ½(1/σ₁ + 1/σ₂) = (1.25, 4/3)
    let rep = online(dir.path(), &basis, "[0.8, 0.75]");
    assert!(f(&rep["surrogate_err"]) <= 1e-10);

    // τ ≡ 1 against σ = {1, ½}: distance 1/3 at a = 2/3
    let dir = TempDir::new().unwrap();
    let basis = greedy_basis(dir.path(), "[[1.0, 0.5]]");
    let rep = online(dir.path(), &basis, "[1.0, 1.0]");
    assert!((f(&rep["surrogate_err"]) - 1.0 / 3.0).abs() < 1e-12);
    assert!((f(&rep["max_derivative_error"]) - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(rep["passed"], Value::Bool(true));
}

#[test]
fn online_missing_basis_is_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "o.json",
        r#"{"basis": "nope.json", "tau": {"type": "constant", "grid": {"dim": "line", "cells": 2}, "value": 1.0},
            "source": {"type": "constant", "value": 1.0}}"#,
    );
    let o = run(&["online"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn minimax_formats_and_check_failure() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.csv", "row,col,value\n0,0,1\n1,0,2\n");
    write(dir.path(), "b.csv", "1\n1\n");
    let cfg = write(dir.path(), "m.json", r#"{"matrix": "a.csv", "target": "b.csv"}"#);
    let o = run(&["minimax"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0));
    let rep = json(&dir.path().join("out/minimax_result.json"));
    assert!((f(&rep["t"]) - 1.0 / 3.0).abs() < 1e-9);
    assert!((f(&rep["a"][0]) - 2.0 / 3.0).abs() < 1e-9);

    // lattice box too small to reach the optimum
    let cfg = write(
        dir.path(),
        "m2.json",
        r#"{"matrix": "a.csv", "target": "b.csv", "brute_force": {"half_width": 0.1, "step": 0.01}}"#,
    );
    let o = run(&["minimax"], &cfg, &dir.path().join("out2"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn power_cap_is_numerical_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "t.json",
        r#"{"pairs": [{"sigma": {"type": "values", "grid": {"dim": "square", "cells_per_axis": 2}, "values": [1, 2, 1.5, 1]},
              "sigma_tilde": {"type": "constant", "grid": {"dim": "square", "cells_per_axis": 2}, "value": 1.2}}],
            "bounds": [1, 2], "subdivisions": [8], "power": {"max_iter": 2, "tol": 1e-16}}"#,
    );
    let o = run(&["verify", "theorem1"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = repo_config("operator_identity.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["verify", "operator-identity"], &cfg, &a);
    let o = bin()
        .args(["verify", "operator-identity", "--seed", "99", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let ra = json(&a.join("operator_identity_report.json"));
    let rb = json(&b.join("operator_identity_report.json"));
    assert_eq!(rb["inputs"]["seed"], 99);
    assert_ne!(ra["pairs"][0]["sigma"], rb["pairs"][0]["sigma"]);
}
