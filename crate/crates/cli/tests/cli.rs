//! End-to-end runs of the binary: exit codes, artifacts and output schemas.

use std::path::Path;
use std::process::{Command, Output};

fn sdcbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdcbf")).args(args).output().expect("binary runs")
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).expect("golden file").trim_end().to_string()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &serde_json::Value) -> String {
    v.as_object().unwrap().keys().cloned().collect::<Vec<_>>().join("\n")
}

#[test]
fn run_writes_artifacts_with_stable_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e1");
    let o = sdcbf(&["run", "--scenario", "example1", "--controller", "usdcbf", "--out", out.to_str().unwrap()]);
    // Example 1 has steps where no admissible input satisfies the constraint.
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(first_line(&out.join("trajectory.csv")), golden("example1_trajectory_header.txt"));
    assert_eq!(first_line(&out.join("steps.csv")), golden("example1_steps_header.txt"));
    let summary = json(&out.join("summary.json"));
    assert_eq!(keys(&summary), golden("summary_keys.txt"));
    assert_eq!(keys(&json(&out.join("timing.json"))), golden("timing_keys.txt"));
    assert_eq!(summary["violation"], false);
    assert_eq!(summary["steps_completed"], 500);
}

#[test]
fn naive_violation_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |s: &str| tmp.path().join(s).to_str().unwrap().to_string();
    let hi = dir("e2c");
    let o = sdcbf(&["run", "--scenario", "example2", "--controller", "naive", "--eps-x", "0.15", "--out", &hi]);
    assert_eq!(o.status.code(), Some(0));
    let lo = dir("e2a");
    assert_eq!(sdcbf(&["run", "--scenario", "example2", "--controller", "naive", "--eps-x", "0.05", "--out", &lo]).status.code(), Some(0));
    let s_hi = json(&Path::new(&hi).join("summary.json"));
    let s_lo = json(&Path::new(&lo).join("summary.json"));
    assert_eq!(s_hi["violation"], true);
    assert!(s_hi["min_h_overall"].as_f64().unwrap() < s_lo["min_h_overall"].as_f64().unwrap());
}

#[test]
fn example3_usdcbf_at_100hz_stays_in_the_box() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e3");
    let o = sdcbf(&["run", "--scenario", "example3", "--controller", "usdcbf", "--rate", "100", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["dt"], 0.01);
    let min_h = s["min_h"].as_array().unwrap();
    assert_eq!(min_h.len(), 6);
    assert!(min_h.iter().all(|v| v.as_f64().unwrap() >= 0.0));
}

#[test]
fn sweep_runs_the_cross_product() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rate");
    let o = sdcbf(&[
        "sweep", "--scenario", "example3", "--axis", "rate", "--values", "50,100", "--controllers", "naive,usdcbf", "--out",
        out.to_str().unwrap(), "--workers", "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], golden("comparison_header.txt"));
    assert_eq!(lines.len(), 5);
    for (v, k) in [("50", "naive"), ("50", "usdcbf"), ("100", "naive"), ("100", "usdcbf")] {
        assert!(out.join(format!("rate-{v}")).join(k).join("summary.json").exists());
    }
}

#[test]
fn empty_sweep_values_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sdcbf(&["sweep", "--scenario", "example2", "--axis", "eps-x", "--values", "", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_reports_degree_and_gains() {
    let o = sdcbf(&["validate", "--scenario", "example2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("relative degree r = 2, a = (20, 100), lambda = (10, 10)"), "{text}");
    assert!(text.contains("at x0 nonnegative"));
    let o = sdcbf(&["validate", "--scenario", "example1"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("relative degree r = 1, gamma = 3"));
}

#[test]
fn validate_flags_an_empty_shrunk_input_set() {
    let o = sdcbf(&["validate", "--scenario", "example1", "--eps-u", "0.6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("InfeasibleInputSet"));
}

#[test]
fn config_errors_carry_location_and_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.cfg");
    let good = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/example1.cfg")).unwrap();
    std::fs::write(&path, good.replace("gamma = 3.0", "gamma = -3.0")).unwrap();
    let o = sdcbf(&["run", "--scenario", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("barriers[0].gamma"));
    std::fs::write(&path, good.replace("[sampling]", "[sampling]\nbogus = 1")).unwrap();
    let o = sdcbf(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"), "{}", String::from_utf8_lossy(&o.stderr));
    let o = sdcbf(&["run", "--scenario", "no-such-scenario"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_has_no_side_effects() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sdcbf")).current_dir(tmp.path()).args(["validate", "--scenario", "example3"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}
