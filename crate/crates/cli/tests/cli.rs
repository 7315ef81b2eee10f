//! End-to-end checks of the command-line interface: artifacts, headers,
//! exit codes, and the jobs environment fallback.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_structured-harvest"))
}

fn first_line(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines().next().unwrap_or_default().to_string()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn steady_emits_profile_curve_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["steady", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(first_line(&dir.path().join("steady_profile.csv")), "l,x");
    assert_eq!(first_line(&dir.path().join("closure_curve.csv")), "E,F");
    let summary = read_json(&dir.path().join("steady_summary.json"));
    let e_star = summary["E_star"].as_f64().unwrap();
    assert!((e_star - 103108.17).abs() / 103108.17 < 5e-3);
    assert_eq!(summary["n_cells"], 400);
    assert!(summary["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn replacement_emits_curve_and_critical_level() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["replacement", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(first_line(&dir.path().join("replacement_curve.csv")), "E,R");
    let summary = read_json(&dir.path().join("replacement_summary.json"));
    let e_crit = summary["E_crit"].as_f64().unwrap();
    assert!((e_crit - 179008.21).abs() / 179008.21 < 5e-3);

    // emitted curve is strictly decreasing in R
    let text = fs::read_to_string(dir.path().join("replacement_curve.csv")).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn simulate_with_threshold_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "simulate",
            "--threshold",
            "60",
            "--horizon",
            "5",
            "--cells",
            "100",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        first_line(&dir.path().join("trajectory.csv")),
        "t,E,N,harvest_value_rate"
    );
    assert_eq!(first_line(&dir.path().join("snapshot_terminal.csv")), "l,x");
    let summary = read_json(&dir.path().join("simulate_summary.json"));
    assert_eq!(summary["l_star"].as_f64(), Some(60.0));
    assert!(summary["E_terminal"].as_f64().unwrap() > 0.0);
}

#[test]
fn custom_initial_state_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("init.csv");
    let mut body = String::from("l,x\n");
    for i in 0..50 {
        body.push_str(&format!("{},{}\n", 20.0 + i as f64, 100.0));
    }
    fs::write(&init, body).unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        format!(
            "{{\"n_cells\": 50, \"initial_condition\": {{\"custom-file\": {:?}}}}}",
            init.to_str().unwrap()
        ),
    )
    .unwrap();
    let status = bin()
        .args(["simulate", "--horizon", "1", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn sweep_restricted_to_the_upper_range_warns_about_the_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        "{\"n_cells\": 100, \"sweep\": {\"min\": 100.0, \"max\": 130.0, \"spacing\": 10.0}}",
    )
    .unwrap();
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let optimum = read_json(&dir.path().join("optimum.json"));
    assert_eq!(optimum["l_star_opt"].as_f64(), Some(100.0));
    assert_eq!(
        optimum["refine_warning"].as_str(),
        Some("optimum at sweep boundary")
    );
}

#[test]
fn adjoint_requires_a_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["adjoint", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn adjoint_at_top_size_reports_all_harvest() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["adjoint", "--threshold", "130", "--cells", "100", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(first_line(&dir.path().join("adjoint.csv")), "l,lambda,S");
    let summary = read_json(&dir.path().join("switching.json"));
    assert_eq!(summary["case"].as_str(), Some("all-harvest"));
    assert!(summary["weak_coupling_ratio"].is_null());
}

#[test]
fn invalid_parameters_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, "{\"params\": {\"K\": -1.0, \"mu0\": -2.0}}").unwrap();
    let output = bin()
        .args(["steady", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("K"));
    assert!(stderr.contains("mu0"));
}

#[test]
fn cfl_violation_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    // full CFL step plus harvesting from an empty ocean: the removal term
    // pushes the update coefficient negative on the very first step
    fs::write(
        &config,
        "{\"cfl_safety\": 1.0, \"initial_condition\": \"zero\"}",
    )
    .unwrap();
    let output = bin()
        .args(["simulate", "--threshold", "40", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stderr).contains("CFL"));
}

#[test]
fn jobs_env_fallback_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        "{\"n_cells\": 100, \"sweep\": {\"min\": 50.0, \"max\": 70.0, \"spacing\": 10.0}}",
    )
    .unwrap();
    let status = bin()
        .env("STRUCTURED_HARVEST_JOBS", "2")
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());

    let bad = bin()
        .env("STRUCTURED_HARVEST_JOBS", "many")
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(2));
}
