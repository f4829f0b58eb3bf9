use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torus-toeplitz"))
}

fn config(dir: &Path, lambdas: &str, h_entries: Option<&str>) -> PathBuf {
    let identities = match h_entries {
        Some(h) => format!(r#", "identities": {{"h_entries": {h}, "lambdas": [1, 2]}}"#),
        None => r#", "identities": {"lambdas": [1]}"#.to_string(),
    };
    let body = format!(
        r#"{{
  "triangle": {{"nu1": [-1, 1], "a": 2}},
  "symbol": {{"mode": "alpha_coeffs", "entries": [
    {{"k": [0, 0], "re": 1.0, "im": 0.0}},
    {{"k": [1, 0], "re": -0.5, "im": 0.0}}]}},
  "cone": [[1, 0], [1, 1]],
  "sweep": {{"lambda_list": {lambdas}}},
  "numerics": {{"grid_n": 128, "box_m": 48}}{identities}
}}"#
    );
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn trace_sweep_writes_one_row_per_scale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[1, 2, 3, 4]", None);
    let out = dir.path().join("out");
    let o = run(&["trace-sweep"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("lambda,"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("fitted slope"));
    assert!(out.join("report.json").exists());
    assert!(out.join("run.json").exists());
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[1, 2, 3]", None);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(run(&["det-sweep", "--seed", "7"], &cfg, out).status.success());
    }
    let read = |d: &Path| std::fs::read(d.join("sweep.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn factorize_and_invert_report_small_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[1]", None);
    let out = dir.path().join("out");
    let o = run(&["factorize"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("exact=true"));
    let o = run(&["invert", "--lambda", "2"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("invert.json")).unwrap()).unwrap();
    assert!(doc["max_column_rel_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn identities_with_a_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let h = r#"[{"k": [1, 0], "re": 0.25, "im": 0.0}, {"k": [-1, 0], "re": 0.25, "im": 0.0}]"#;
    let cfg = config(dir.path(), "[1]", Some(h));
    let out = dir.path().join("out");
    let o = run(&["check-identities"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("identities.json")).unwrap()).unwrap();
    for r in doc["integral"].as_array().unwrap() {
        assert!(r["gap"].as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn non_contraction_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    // default h = 1 - f has sup norm 1.25 for this symbol
    let cfg = config(dir.path(), "[1]", None);
    let o = run(&["check-identities"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error:"), "{err}");
    assert!(!err.contains("panicked"));
}

#[test]
fn missing_config_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["factorize"], &dir.path().join("nope.json"), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("nope.json") && !err.contains("panicked"), "{err}");
}
