use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn heatlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab")).args(args).output().unwrap()
}

fn heatlab_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab")).args(args).env("HEATLAB_THREADS", threads).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn rows(out: &Output) -> Vec<Value> {
    json(out)["rows"].as_array().unwrap().clone()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn circle_trace_example() {
    let r = rows(&heatlab(&["trace", "--model", "circle", "--t", "1.0"]));
    assert_eq!(r.len(), 1);
    assert!((f(&r[0]["value"]) - 1.7726372048).abs() < 1e-9);
    for key in ["inputs", "value", "error_bound", "method", "formula"] {
        assert!(r[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn floats_carry_seventeen_digits() {
    let out = heatlab(&["trace", "--t", "1.0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.contains("\"value\"")).unwrap();
    let digits: String = line.split(':').nth(1).unwrap().trim().trim_end_matches(',').split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(digits.len(), 17, "{line}");
}

#[test]
fn bose_divergence_is_a_validation_failure() {
    let out = heatlab(&["qtrace", "--statistics", "bose", "--mu", "5", "--model", "circle", "--mass2", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "BoseDivergence");
    assert_eq!(err["class"], "validation");
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(heatlab(&["trace", "--t", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(heatlab(&["trace", "--t", "-1"]).status.code(), Some(2));
    assert_eq!(heatlab_env(&["trace", "--t", "1"], "zero").status.code(), Some(2));
    assert_eq!(heatlab(&["fit", "--op", "trace", "--min", "0.01", "--max", "0.05"]).status.code(), Some(2));
}

#[test]
fn weyl_convolution_quadrature_check() {
    let r = rows(&heatlab(&["weyl", "convolve", "--n", "2", "--b", "1", "--t", "0.5", "--s", "0.5", "--check-quadrature"]));
    assert!(f(&r[0]["discrepancy"]) <= 1e-6);
}

#[test]
fn failed_cross_check_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let job = dir.path().join("job.toml");
    std::fs::write(
        &job,
        r#"command = "weyl"
[weyl.plus]
g = [[1.0, 0.0], [0.0, 1.0]]
curv = [[0.0, 1.0], [-1.0, 0.0]]
[weyl.minus]
g = [[2.0, 0.0], [0.0, 2.0]]
curv = [[0.0, -0.5], [0.5, 0.0]]
[options]
check_quadrature = true
x = [0.3, -0.2]
[grid]
t = [0.01]
s = [3.0]
[tolerances]
check = 1e-14
"#,
    )
    .unwrap();
    let out = heatlab(&["run", job.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["class"], "numerical");
    assert!(err["inputs"].is_object());
}

fn series_value(r: &[Value], power: &str) -> f64 {
    f(&r.iter().find(|row| row["inputs"]["power"] == power).unwrap()["value"])
}

#[test]
fn interval_dirichlet_sweep_constant_term() {
    let r = rows(&heatlab(&["fit", "--op", "trace", "--model", "interval", "--min", "1e-3", "--max", "1e-2", "--powers=-1/2,0,1/2,1"]));
    assert!((series_value(&r, "0") + 0.5).abs() < 1e-4);
    assert!(f(&r[0]["condition"]) > 1.0);
}

#[test]
fn circle_heatdet_sweep_leading_term() {
    let r = rows(&heatlab(&["fit", "--op", "heatdet", "--model", "circle", "--min", "1e-4", "--max", "1e-3"]));
    let lead = series_value(&r, "-3/2");
    assert!((lead / 0.3133285 - 1.0).abs() < 5e-3, "{lead}");
}

#[test]
fn relative_sweep_leading_term() {
    let r = rows(&heatlab(&["fit", "--op", "relative", "--min", "0.002", "--max", "0.02", "--points", "6", "--t", "0.5", "--s", "2"]));
    let predicted = 2.0 * std::f64::consts::PI / (0.5f64 + 4.0 * 2.0).sqrt();
    assert!((f(&r[0]["predicted"]) - predicted).abs() < 1e-12);
    assert!(f(&r[0]["relative_error"]) < 1e-2);
}

fn emit_and_run(args: &[&str], dir: &Path) {
    let mut emit = args.to_vec();
    emit.push("--emit-job");
    let out = heatlab(&emit);
    assert!(out.status.success());
    let path = dir.join("job.toml");
    std::fs::write(&path, &out.stdout).unwrap();
    let direct = heatlab(args);
    let via_file = heatlab(&["run", path.to_str().unwrap()]);
    assert!(direct.status.success() && via_file.status.success(), "{args:?}");
    assert_eq!(direct.stdout, via_file.stdout, "{args:?}");
    // the emitted job re-emits identically
    let again = heatlab(&["run", path.to_str().unwrap(), "--emit-job"]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn job_files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    emit_and_run(&["trace", "--model", "interval", "--left", "robin:0.3", "--right", "neumann", "--t", "0.01,0.1"], dir.path());
    emit_and_run(&["qtrace", "--model", "torus", "--metric", "1,0.2;0.2,2", "--mass2", "1", "--beta", "0.5", "--statistics", "fermi", "--mu", "0.5"], dir.path());
    emit_and_run(&["bogolyubov", "--pair", "dirac", "--plus", "1", "--minus", "2", "--beta", "1", "--statistics", "fermi"], dir.path());
    emit_and_run(&["weyl", "density", "--t", "0.5", "--s", "0.3", "--b-minus", "-0.5"], dir.path());
    emit_and_run(&["ggs-gamma", "--n", "4", "--kappa", "0.3", "--fiber", "3", "--method", "clifford"], dir.path());
    emit_and_run(&["fit", "--op", "heatdet", "--min", "1e-4", "--max", "1e-3", "--points", "6"], dir.path());
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let args = ["qtrace", "--model", "circle", "--mass2", "1", "--beta", "0.1,0.3,1,2", "--method", "integral"];
    let one = heatlab_env(&args, "1");
    let four = heatlab_env(&args, "4");
    let again = heatlab_env(&args, "4");
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(four.stdout, again.stdout);
}

#[test]
fn csv_output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = heatlab(&["aq", "--mass2", "1", "--q", "0,1", "--format", "csv", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "inputs.q.re,inputs.q.im,inputs.series_order,value.re,value.im,error_bound,method,formula,split_point"
    );
    for line in lines {
        let re: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((re - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    }
}

#[test]
fn every_subcommand_emits_complete_rows() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["spectrum", "--cutoff", "10"],
        vec!["trace", "--t", "0.5"],
        vec!["rtrace", "--beta", "1", "--method", "integral"],
        vec!["qtrace", "--mass2", "1", "--beta", "1", "--statistics", "fermi"],
        vec!["aq", "--mass2", "1", "--q", "0.5"],
        vec!["zeta", "--s", "1", "--exclude-zero-modes"],
        vec!["logdet", "--exclude-zero-modes"],
        vec!["coeffs", "--model", "torus", "--metric", "1,0;0,2"],
        vec!["ggs-gamma", "--n", "2", "--kappa", "0.5", "--fiber", "3", "--rank", "2"],
        vec!["nonlaplace", "--h", "1,2"],
        vec!["magnetic", "--b", "1", "--t", "0.5", "--landau-check"],
        vec!["relative", "--t", "1", "--s", "1", "--quantity", "psi"],
        vec!["bogolyubov", "--beta", "1"],
        vec!["heatdet", "--t", "0.5"],
        vec!["weyl", "single", "--t", "0.5"],
        vec!["fit", "--op", "trace", "--min", "0.001", "--max", "0.01"],
    ];
    for args in &cases {
        let r = rows(&heatlab(args));
        assert!(!r.is_empty(), "{args:?}");
        for row in &r {
            for key in ["inputs", "value", "error_bound", "method", "formula"] {
                assert!(row.get(key).is_some(), "{args:?} missing {key}");
            }
        }
    }
}

#[test]
fn documented_values() {
    let det = rows(&heatlab(&["logdet", "--exclude-zero-modes"]));
    assert!((f(&det[0]["det"]["re"]) / (4.0 * std::f64::consts::PI.powi(2)) - 1.0).abs() < 1e-4);
    let z = rows(&heatlab(&["zeta", "--s", "1", "--exclude-zero-modes"]));
    assert!((f(&z[0]["value"]["re"]) - std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-8);
    let g = rows(&heatlab(&["ggs-gamma", "--n", "3", "--kappa", "0.4"]));
    assert!((f(&g[0]["value"]) - 2.0 / 0.6).abs() < 1e-6);
    let a0 = rows(&heatlab(&["nonlaplace", "--h", "1,2"]));
    assert!((f(&a0[0]["value"]) - 1.5).abs() < 1e-7);
}
