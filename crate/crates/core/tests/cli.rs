use std::path::Path;
use std::process::Command;

use laplift::registration::{save_pgm, test_pattern};

fn laplift(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_laplift")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn files_under(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\"task\": \"toy1d\", ");
    let out = laplift(&["--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"task": "toy1d", "colour": "red"}"#);
    let out = laplift(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn zero_trials_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"task": "check", "check": {"trials": 0}}"#);
    assert_eq!(laplift(&["--config", &cfg, "--out", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn injected_fault_fails_the_projection_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"task": "check", "check": {"suites": ["projection", "certificate"], "trials": 2, "fault": "projection"}}"#,
    );
    let out_dir = dir.path().join("o");
    let out = laplift(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("projection"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("check.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["suites"][1]["passed"], true);
}

#[test]
fn default_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"task": "check", "check": {"trials": 3, "kset_samples": 2000}}"#);
    let out = laplift(&["--config", &cfg, "--out", dir.path().join("o").to_str().unwrap(), "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn toy_runs_are_bitwise_reproducible_and_confined() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "toy.json", r#"{"task": "toy1d", "grid": {"shape": [10]},
        "labels": {"type": "interval", "a": -1.0, "b": 1.0, "count": 10}}"#);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = laplift(&[
            "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--deterministic", "--workers", "2",
            "--log-progress", "progress.jsonl",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(out_dir);
    }
    let names = files_under(&outputs[0]);
    assert_eq!(names, ["lifted.bin", "mean.csv", "modes.json", "progress.jsonl", "summary.json", "threshold.csv"]);
    for name in &names {
        assert_eq!(std::fs::read(outputs[0].join(name)).unwrap(), std::fs::read(outputs[1].join(name)).unwrap(), "{name}");
    }
    // nothing else was written next to the config
    assert_eq!(files_under(dir.path()), ["a", "b", "toy.json"]);
    let first = std::fs::read_to_string(outputs[0].join("progress.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(rec["iter"], 10);
}

#[test]
fn progress_log_outside_output_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "toy.json", r#"{"task": "toy1d"}"#);
    let elsewhere = dir.path().join("elsewhere.jsonl");
    let out = laplift(&[
        "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap(), "--log-progress", elsewhere.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!elsewhere.exists());
}

#[test]
fn coarse_toy_still_splits_near_the_ends() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "toy.json", r#"{"task": "toy1d", "grid": {"shape": [9]},
        "labels": {"type": "interval", "a": -1.0, "b": 1.0, "count": 3}}"#);
    let out_dir = dir.path().join("o");
    let out = laplift(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "--max-iter", "50000"]);
    assert_eq!(out.status.code(), Some(0));
    let modes: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("modes.json")).unwrap()).unwrap();
    for pixel in [0, 8] {
        let m = modes[pixel]["modes"].as_array().unwrap();
        assert_eq!(m.len(), 2, "pixel {pixel}: {m:?}");
    }
}

#[test]
fn missing_image_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.json", r#"{"task": "register",
        "data": {"kind": "registration", "reference": "/nonexistent/r.pgm", "template": "/nonexistent/t.pgm"}}"#);
    let out = laplift(&["--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn identical_images_register_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let img = test_pattern(10, 10);
    save_pgm(&img, dir.path().join("r.pgm")).unwrap();
    save_pgm(&img, dir.path().join("t.pgm")).unwrap();
    let body = format!(
        r#"{{"task": "register", "labels": {{"type": "disk", "radius": 2.0, "rings": [6]}},
        "data": {{"kind": "registration", "reference": "{0}/r.pgm", "template": "{0}/t.pgm"}},
        "solver": {{"max_iter": 3000, "tol": 1e-5}}}}"#,
        dir.path().display()
    );
    let cfg = write_config(dir.path(), "r.json", &body);
    let out_dir = dir.path().join("o");
    let out = laplift(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files_under(&out_dir), ["deformation.csv", "difference_after.pgm", "difference_before.pgm", "summary.json", "warped.pgm"]);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["mean_displacement"].as_f64().unwrap() <= 0.2);
    assert!(summary.get("epe_mean").is_none());
    let csv = std::fs::read_to_string(out_dir.join("deformation.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,dx,dy"));
    assert_eq!(csv.lines().count(), 101);
}
