use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use incentive_forge::cli::{EvaluateResult, GradcheckResult, OptimizeResult, ScalarResult};
use incentive_forge::Regime;

const SCALAR: &str = r#"{
  "n": 1, "m": 1,
  "A": [0.4], "B": [1.0], "Q": [1.0], "R": [1.0],
  "xref": [1.0], "N": 10, "mu0": [-1.0], "Sigma0": [0.09],
  "theta": [-1.0],
  "monte_carlo": { "samples": 5, "seed": 1 },
  "sweep": { "variable": "theta", "grid": { "start": -2.0, "stop": 0.0, "step": 0.5 } }
}"#;

const PLANAR: &str = r#"{
  "n": 2, "m": 1,
  "A": [1.0, 0.3, 0.0, 1.0], "B": [0.5, 1.0], "Q": [1.0, 0.0, 0.0, 1.0], "R": [2.0],
  "xref": [1.0, 0.0], "N": 50, "mu0": [-1.0, 0.0]
}"#;

fn run(dir: &Path, command: &str, scenario: &str, extra: &[&str]) -> Output {
    let path = dir.join("scenario.json");
    fs::write(&path, scenario).unwrap();
    Command::new(env!("CARGO_BIN_EXE_incentive-forge"))
        .arg(command)
        .arg("--scenario")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn evaluate_writes_cost_and_stability() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "evaluate", SCALAR, &[]);
    assert!(out.status.success());
    let text = read(tmp.path(), "evaluate.json");
    let result: EvaluateResult = serde_json::from_str(&text).unwrap();
    assert!((result.cost.total - 5.588404708171801).abs() < 1e-12);
    assert!(result.stability.is_schur);
    assert_eq!(serde_json::to_string_pretty(&result).unwrap() + "\n", text);
}

#[test]
fn evaluate_without_theta_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "evaluate", PLANAR, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`theta`"));
}

#[test]
fn unknown_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "evaluate", &SCALAR.replace("\"N\"", "\"horizon\""), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_and_catches_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "gradcheck", SCALAR, &[]);
    assert!(out.status.success());
    let ok: GradcheckResult = serde_json::from_str(&read(tmp.path(), "gradcheck.json")).unwrap();
    assert!(ok.passed && ok.relative_discrepancy < 1e-8);

    let out = run(tmp.path(), "gradcheck", SCALAR, &["--corrupt-gradient", "0.01"]);
    assert_eq!(out.status.code(), Some(4));
    let bad: GradcheckResult = serde_json::from_str(&read(tmp.path(), "gradcheck.json")).unwrap();
    assert!(!bad.passed);
}

#[test]
fn optimize_writes_trace_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "optimize", PLANAR, &[]);
    assert!(out.status.success());
    let summary: OptimizeResult = serde_json::from_str(&read(tmp.path(), "optimize.json")).unwrap();
    assert!(summary.converged && summary.stability.is_schur);
    assert!(summary.steady_state_error_norm.unwrap() <= 1e-6);

    let trace = read(tmp.path(), "optimize_trace.csv");
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iter,cost,grad_norm,theta_0_0,theta_1_0"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), summary.iterations + 1);
    assert_eq!(rows.last().unwrap()[3..], summary.theta_final[..]);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
}

#[test]
fn optimizer_settings_are_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = PLANAR.replace("\"N\": 50", "\"N\": 50, \"optimizer\": { \"max_iters\": 3 }");
    let out = run(tmp.path(), "optimize", &scenario, &[]);
    assert!(out.status.success());
    let summary: OptimizeResult = serde_json::from_str(&read(tmp.path(), "optimize.json")).unwrap();
    assert_eq!(summary.iterations, 3);
    assert!(!summary.converged);
}

#[test]
fn simulate_single_and_many() {
    let tmp = tempfile::tempdir().unwrap();
    let single = SCALAR.replace("\"samples\": 5", "\"samples\": 1");
    assert!(run(tmp.path(), "simulate", &single, &[]).status.success());
    let traj = read(tmp.path(), "trajectory.csv");
    assert!(traj.starts_with("k,x_0,u_0,payment,leader_stage_cost,follower_stage_cost\n"));
    assert_eq!(traj.lines().count(), 11);

    let tmp = tempfile::tempdir().unwrap();
    assert!(run(tmp.path(), "simulate", SCALAR, &[]).status.success());
    for i in 0..5 {
        assert!(tmp.path().join("out").join(format!("trajectory_{i}.csv")).exists());
    }
    let summary = read(tmp.path(), "summary.csv");
    assert!(summary.starts_with("k,mean_e_0,var_e_0,stderr_e_0,mu_0,sigma_0\n"));
}

#[test]
fn seed_flag_overrides_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    run(tmp.path(), "simulate", SCALAR, &[]);
    let default = read(tmp.path(), "trajectory_0.csv");
    run(tmp.path(), "simulate", SCALAR, &["--seed", "1"]);
    assert_eq!(read(tmp.path(), "trajectory_0.csv"), default);
    run(tmp.path(), "simulate", SCALAR, &["--seed", "2"]);
    assert_ne!(read(tmp.path(), "trajectory_0.csv"), default);
}

#[test]
fn divergent_simulation_exits_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = SCALAR.replace("\"theta\": [-1.0]", "\"theta\": [-500.0]").replace("\"N\": 10", "\"N\": 400");
    let out = run(tmp.path(), "simulate", &scenario, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage"));
}

#[test]
fn scalar_report() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(tmp.path(), "scalar", SCALAR, &[]).status.success());
    let result: ScalarResult = serde_json::from_str(&read(tmp.path(), "scalar.json")).unwrap();
    assert_eq!(result.stability_interval, [-2.8, 1.2]);
    assert_eq!(result.regime, Some(Regime::Interior));
    assert!((result.infinite_horizon.theta_star.unwrap() + 5.0 / 3.0).abs() < 1e-12);
    assert!((result.r_infinity.theta_star.unwrap() + 1.3792424562).abs() < 1e-9);

    let out = run(tmp.path(), "scalar", PLANAR, &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(tmp.path(), "sweep", SCALAR, &[]).status.success());
    let csv = read(tmp.path(), "sweep_theta.csv");
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("theta,cost\n-2.0,"));

    let by_r = SCALAR.replace(
        r#""variable": "theta", "grid": { "start": -2.0, "stop": 0.0, "step": 0.5 }"#,
        r#""variable": "R", "grid": [1, 1000]"#,
    );
    assert!(run(tmp.path(), "sweep", &by_r, &[]).status.success());
    let csv = read(tmp.path(), "sweep_R.csv");
    let argmins: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!((argmins[0] + 1.0484).abs() < 1e-3);
    assert!((argmins[1] + 1.3792).abs() < 1e-3);

    let out = run(tmp.path(), "sweep", PLANAR, &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn horizon_sweep_moves_toward_the_asymptote() {
    let tmp = tempfile::tempdir().unwrap();
    let by_n = SCALAR.replace(
        r#""variable": "theta", "grid": { "start": -2.0, "stop": 0.0, "step": 0.5 }"#,
        r#""variable": "N", "grid": [10, 50, 200, 1000], "theta_range": [-2.8, 1.2]"#,
    );
    assert!(run(tmp.path(), "sweep", &by_n, &[]).status.success());
    let csv = read(tmp.path(), "sweep_N.csv");
    let gaps: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| (l.split(',').nth(1).unwrap().parse::<f64>().unwrap() + 5.0 / 3.0).abs())
        .collect();
    assert_eq!(gaps.len(), 4);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!((gaps[3] - 0.0284).abs() < 1e-3, "{gaps:?}");
}

#[test]
fn output_dir_from_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("from_scenario");
    let scenario = SCALAR.replace(
        "\"N\": 10",
        &format!("\"N\": 10, \"output_dir\": {}", serde_json::to_string(&target).unwrap()),
    );
    let path = tmp.path().join("s.json");
    fs::write(&path, scenario).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_incentive-forge"))
        .args(["evaluate", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("evaluate.json").exists());
}
