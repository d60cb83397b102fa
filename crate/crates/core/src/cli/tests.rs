use super::*;
use output::to_json_line;
use std::fs;

fn opts(dir: &Path, config: Option<PathBuf>) -> RunOptions {
    RunOptions { config, out: Some(dir.to_path_buf()), seed: None, quiet: true }
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn lyapunov_report_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(Command::Lyapunov, &opts(a.path(), None)).unwrap();
    let rb = run(Command::Lyapunov, &opts(b.path(), None)).unwrap();
    let ja = fs::read(a.path().join("lyapunov.json")).unwrap();
    let jb = fs::read(b.path().join("lyapunov.json")).unwrap();
    assert_eq!(ja, jb);
    assert_eq!(ra.report.content_hash, rb.report.content_hash);
    let chi = ra.report.result["qr"]["chi_plus"].as_f64().unwrap();
    assert!((chi - 0.9624236501192069).abs() < 1e-8);
    assert_eq!(ra.exit_code(), 0);
}

#[test]
fn config_without_system_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let c = write_config(d.path(), r#"{"params": {"n": 10}}"#);
    let e = run(Command::Lyapunov, &opts(d.path(), Some(c))).unwrap_err();
    assert!(matches!(e, Error::Config(_)));
    assert_eq!(error_exit_code(&e), 1);
}

#[test]
fn unknown_param_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let c = write_config(d.path(), r#"{"system": {"kind": "perturbed_cat", "delta": 0.01}, "params": {"steps": 10}}"#);
    let e = run(Command::Lyapunov, &opts(d.path(), Some(c))).unwrap_err();
    assert_eq!(error_exit_code(&e), 1);
}

#[test]
fn command_mismatch_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let c = write_config(d.path(), r#"{"system": {"kind": "perturbed_cat", "delta": 0.01}, "command": "split"}"#);
    assert!(matches!(run(Command::Lyapunov, &opts(d.path(), Some(c))), Err(Error::Config(_))));
}

#[test]
fn config_echo_and_hash() {
    let d = tempfile::tempdir().unwrap();
    let c = write_config(d.path(), r#"{"system": {"kind": "perturbed_cat", "delta": 0.01}, "seed": 5, "params": {"n": 50}}"#);
    let mut o = opts(d.path(), Some(c));
    o.seed = Some(9);
    let r = run(Command::Lyapunov, &o).unwrap();
    assert_eq!(r.report.config.seed, 9);
    assert_eq!(r.report.config.params["n"], 50);
    assert_eq!(r.report.config.params["x"][0].as_f64(), Some(0.3));
    let echoed = to_json(&r.report.config).unwrap();
    assert_eq!(r.report.input_hash, blob_hash(echoed.as_bytes()));
    let log = fs::read_to_string(d.path().join("run.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(d.path().join("lyapunov.meta.json").exists());
}

#[test]
fn verify_lemmas_passes_on_cat() {
    let d = tempfile::tempdir().unwrap();
    let c = write_config(
        d.path(),
        r#"{"system": {"kind": "affine_torus", "matrix": [[2,1],[1,1]], "shift": [0,0]},
            "params": {"pairs": 500, "count_max": 12, "power_inclusion": {"samples": 500}, "holangle": {"points": 5}}}"#,
    );
    let r = run(Command::VerifyLemmas, &opts(d.path(), Some(c))).unwrap();
    assert_eq!(r.report.violations, 0);
    assert_eq!(r.exit_code(), 0);
    let csv = fs::read_to_string(d.path().join("counting.csv")).unwrap();
    assert!(csv.starts_with("n,S,count,log_count,bound"));
}

#[test]
fn rect_writes_polylines() {
    let d = tempfile::tempdir().unwrap();
    let c = write_config(d.path(), r#"{"system": {"kind": "perturbed_cat", "delta": 0.01}, "params": {"g": 4}}"#);
    let r = run(Command::Rect, &opts(d.path(), Some(c))).unwrap();
    assert_eq!(r.report.violations, 0);
    let csv = fs::read_to_string(d.path().join("rect_polylines.csv")).unwrap();
    assert!(csv.lines().count() > 10);
}

#[test]
fn split_of_explicit_matrix() {
    let d = tempfile::tempdir().unwrap();
    let c = write_config(d.path(), r#"{"system": {"kind": "perturbed_cat", "delta": 0.0}, "params": {"matrix": [[4,0],[0,0.25]]}}"#);
    let r = run(Command::Split, &opts(d.path(), Some(c))).unwrap();
    let s = &r.report.result;
    assert!((s["sigma_max"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!((s["sigma_min"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn floats_carry_seventeen_digits() {
    assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    assert_eq!(to_json_line(&serde_json::json!({"a": [1.5, 2]})).unwrap(), r#"{"a":[1.5000000000000000e0,2]}"#);
    let v: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
    assert_eq!(v, std::f64::consts::PI);
}

#[test]
fn blob_hash_matches_git() {
    // `git hash-object --object-format=sha256` of an empty blob
    assert_eq!(blob_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
}
