use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(dir: &Path, sub: &str, config: Value) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config.to_string()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_warpcurv"))
        .args([sub, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--threads", "1"])
        .output()
        .unwrap()
}

fn base(n: usize, k: usize) -> Value {
    json!({ "schema": "warpcurv/run-config/v1", "n": n, "k": k, "grid_points": 16 })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_then_audit_radial_beta() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "solve", base(2, 2));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["solution.csv", "trace.json", "audit.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f} missing");
    }
    let trace = read_json(&dir.path().join("out/trace.json"));
    assert_eq!(trace.as_array().unwrap().last().unwrap()["t"], json!(1.0));

    let mut cfg = base(2, 2);
    cfg["audit_field"] = json!(dir.path().join("out/solution.csv"));
    let out = run(dir.path(), "audit", cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn spherical_cap_past_equator_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(2, 2);
    cfg["warp"] = json!({ "kind": "spherical_cap" });
    cfg["annulus"] = json!([0.5, 1.7]);
    let out = run(dir.path(), "solve", cfg);
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn bad_inputs_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(2, 2);
    cfg["no_such_key"] = json!(1);
    assert_eq!(run(dir.path(), "solve", cfg).status.code(), Some(3));
    // n < 2k fails for (4, 2)
    assert_eq!(run(dir.path(), "solve", base(4, 2)).status.code(), Some(3));
    let missing = Command::new(env!("CARGO_BIN_EXE_warpcurv"))
        .args(["mms", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn mms_from_exact_start_needs_no_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(2, 2);
    cfg["mms"] = json!({ "perturbation": 0.0 });
    let out = run(dir.path(), "mms", cfg);
    assert_eq!(out.status.code(), Some(0));
    let rep = read_json(&dir.path().join("out/mms.json"));
    assert_eq!(rep["newton_iters"], json!(0));
    assert_eq!(rep["max_error"], json!(0.0));
}

#[test]
fn repeated_sweep_size_gives_nan_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(2, 2);
    cfg["sweep"] = json!({ "points": [16, 16, 32] });
    let out = run(dir.path(), "sweep", cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let second: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(second[0], "16");
    assert_eq!(second[2], "NaN");

    let mut cfg = base(2, 2);
    cfg["sweep"] = json!({ "points": [16, 32] });
    assert_eq!(run(dir.path(), "sweep", cfg).status.code(), Some(3));
}

#[test]
fn lemmas_and_conjecture_small_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(3, 2);
    cfg["lemmas"] = json!({ "samples": 2000 });
    cfg["conjecture"] = json!({ "budget": 50 });
    let out = run(dir.path(), "lemmas", cfg.clone());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("out/lemmas.json").exists());
    let out = run(dir.path(), "conjecture", cfg);
    assert_eq!(out.status.code(), Some(0));
    let rep = read_json(&dir.path().join("out/conjecture.json"));
    assert!(rep["min_eigenvalue"].as_f64().unwrap() >= -1e-8);
}
