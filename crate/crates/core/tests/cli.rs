use std::fs;
use std::path::Path;
use std::process::Command;

fn fthyp(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_fthyp")).args(args).output().unwrap().status.code().unwrap()
}

fn config_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(fthyp(&["nonsense"]), 1);
    assert_eq!(fthyp(&["lyapunov", "--seed", "x"]), 1);
    assert_eq!(fthyp(&["--help"]), 0);
}

#[test]
fn bad_config_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"params": {}}"#).unwrap();
    let out = d.path().join("out");
    assert_eq!(fthyp(&["lyapunov", "--quiet", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    assert_eq!(fthyp(&["lyapunov", "--quiet", "--config", "/nonexistent.json"]), 1);
}

#[test]
fn rect_violations_exit_two() {
    // a square chart this large fails (H) at K_tol = 0.01
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"system": {"kind": "perturbed_cat", "delta": 0.01}, "params": {"n": 8, "l_e": 0.002, "l_f": 0.002}}"#).unwrap();
    let out = d.path().join("out");
    assert_eq!(fthyp(&["rect", "--quiet", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert!(out.join("rect.json").exists());
}

#[test]
fn shipped_configs_run_deterministically() {
    for (cmd, file) in [("lyapunov", "lyapunov.json"), ("split", "split.json"), ("manifold", "manifold.json"), ("rect", "rect.json")] {
        let d = tempfile::tempdir().unwrap();
        let a = d.path().join("a");
        let b = d.path().join("b");
        let cfg = config_path(file);
        for out in [&a, &b] {
            assert_eq!(fthyp(&[cmd, "--quiet", "--seed", "3", "--config", &cfg, "--out", out.to_str().unwrap()]), 0, "{cmd}");
        }
        let name = format!("{cmd}.json");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{cmd}");
    }
}
