use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ensemble-feedback"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn indices_row_at_zero() {
    let o = run(&["indices", "--builtin", "example41a", "--grid", "201", "--insert", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("theta,kappa_1,kappa_2,h_1,h_2,reachable\n"), "{text}");
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 201, "0 is already a grid point");
    let zero: Vec<_> = rows.iter().filter(|r| r[0].parse::<f64>().unwrap() == 0.0).collect();
    assert_eq!(zero.len(), 1);
    assert_eq!(zero[0][1..], ["2", "2", "2", "2", "1"]);
    assert!(rows.iter().filter(|r| r[0] != zero[0][0]).all(|r| r[3..5] == ["3", "1"]));
}

#[test]
fn design_mi_rejects_example_b_with_witness() {
    let o = run(&["design-mi", "--builtin", "example41b"]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["error"], "non_constant_indices");
    let theta = report["theta"].as_f64().unwrap();
    assert!((theta.abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["indices"]).status.code(), Some(2));
    assert_eq!(run(&["indices", "--builtin", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["indices", "--builtin", "example41a", "--grid", "1"]).status.code(), Some(2));
    assert_eq!(run(&["oscillator", "--g", "2,1", "--k", "4", "--auto-k", "1"]).status.code(), Some(2));
}

#[test]
fn out_directory_holds_artifacts_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mi");
    let o = run(&["design-mi", "--builtin", "example41a", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for name in ["residuals.csv", "transform.json", "conditions.json", "summary.json"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["passed"], true);
    let t = ensemble_feedback::io::parse_transform(&std::fs::read_to_string(out.join("transform.json")).unwrap());
    assert_eq!(t.unwrap().n(), 4);
}

#[test]
fn oscillator_sweep_stays_under_bound() {
    let o = run(&["oscillator", "--g", "2,1", "--theta-star", "1", "--k", "4", "--degrees", "1,2,4:64"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>()[..3], ["1", "2", "4"]);
    for r in &rows {
        let n: usize = r[0].parse().unwrap();
        let measured: f64 = r[1].parse().unwrap();
        if n < 3 {
            assert!(r[2].is_empty());
        } else {
            assert!(measured <= r[2].parse::<f64>().unwrap());
        }
    }
}

#[test]
fn oscillator_rejects_inadmissible_gain() {
    let o = run(&["oscillator", "--g", "2,1", "--theta-star", "1", "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["error"].is_string());
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_replays_synthesized_polynomial() {
    let dir = tempfile::tempdir().unwrap();
    let osc = dir.path().join("osc");
    let o = run(&[
        "oscillator", "--g", "2,1", "--theta-star", "1", "--k", "4", "--degrees", "16", "--out",
        osc.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(osc.join("report.json")).unwrap()).unwrap();
    let measured = report["rows"][0]["measured_error"].as_f64().unwrap();
    let poly: Vec<Value> = report["p_coeffs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| serde_json::json!([c.as_f64().unwrap(), 0.0]))
        .collect();
    let input = write_json(dir.path(), "sim.json", &serde_json::json!({ "polynomial": poly, "target": "sincos" }));
    let base = ["simulate", "--builtin", "oscillator", "--g", "2,1", "--theta-star", "1", "--k", "4"];
    let loose = format!("{}", measured * 1.0001);
    let o = run(&[&base[..], &["--input", &input, "--max-error", &loose]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let deviations: Vec<f64> = csv_rows(&stdout(&o)).iter().map(|r| r.last().unwrap().parse().unwrap()).collect();
    let sup = deviations.iter().cloned().fold(0.0, f64::max);
    assert!((sup - measured).abs() < 1e-9, "{sup} vs {measured}");
    let tight = format!("{}", measured * 0.5);
    let o = run(&[&base[..], &["--input", &input, "--max-error", &tight]].concat());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "bad.json", &serde_json::json!({ "polynomial": [[1.0, 0.0]], "input": [] }));
    let o = run(&["simulate", "--builtin", "example41a", "--input", &input]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["oscillator", "--g", "2,1", "--theta-star", "1", "--auto-k", "2", "--degrees", "3:32"];
    let with = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_ensemble-feedback"))
            .args(args)
            .env("ENSEMBLE_FEEDBACK_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(with("1"), with("4"));
}
