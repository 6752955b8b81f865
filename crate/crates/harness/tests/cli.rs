use std::process::{Command, Output};

use boussinesq_harness::config::{GridSettings, MeshSettings};
use boussinesq_harness::{read_summary, ExperimentConfig};

fn boussinesq(args: &[&str], out: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boussinesq"))
        .args(args)
        .env("BOUSSINESQ_OUT", out)
        .output()
        .unwrap()
}

fn small_config(dir: &std::path::Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::exp1();
    cfg.mesh = MeshSettings { x_left: -20.0, x_right: 40.0, n_cells: 100 };
    cfg.grid = GridSettings { t_final: 1.0, n_steps: 20, theta: 0.5 };
    cfg.optim.max_iters = 3;
    let path = dir.join("small.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn invert_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let o = boussinesq(&["invert", "--config", cfg.to_str().unwrap(), "--max-iters", "2"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_summary(&out.join("report.json")).unwrap();
    assert_eq!(summary.status, "completed");
    assert!(summary.iterations_used <= 2);
    assert_eq!(summary.config.optim.max_iters, 2);
    for f in ["coefficient.csv", "history.csv", "final_state.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn solve_writes_the_final_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = boussinesq(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert_eq!(text.lines().count(), 102);
    assert_eq!(text.lines().next(), Some("xi,eta,u"));
}

#[test]
fn gradcheck_reports_a_small_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = boussinesq(&["gradcheck"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let err: f64 = text.split("error ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(err <= 1e-6, "{text}");
}

#[test]
fn bad_inputs_exit_with_a_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = boussinesq(&["invert"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error [config]"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"experiment_id\": \"exp1\"").unwrap();
    let o = boussinesq(&["invert", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = boussinesq(&["experiment", "exp9"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn overrides_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = boussinesq(&["invert", "--config", cfg.to_str().unwrap(), "--ftol", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
