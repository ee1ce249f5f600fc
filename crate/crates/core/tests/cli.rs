//! Drives the `micromag` binary.

use std::process::Command;

fn micromag(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_micromag")).args(args).env("RUST_LOG", "error").output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn check_mesh_reports_counts() {
    let (code, out) = micromag(&["check-mesh", "box:2"]);
    assert_eq!(code, 0);
    assert!(out.contains("tetrahedra         48"), "{out}");
    assert!(out.contains("angle condition    satisfied"));
}

#[test]
fn strayfield_test_passes_on_ball() {
    let (code, out) = micromag(&["strayfield-test", "ball:2:2", "gcr", "--direction", "1,0,0"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("PASS"));
}

#[test]
fn simulate_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
        [mesh]
        shape = "box"
        cells = [2, 2, 2]
        [material]
        c_exch = 1.0
        alpha = 0.5
        [time]
        k = 0.1
        steps = 10
        [initial]
        kind = "perturbed"
        direction = [0.0, 0.0, 1.0]
        amplitude = 0.5
        [output]
        dir = "out"
        "#,
    )
    .unwrap();
    let (code, out) = micromag(&["simulate", cfg.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("energy decay   pass"));
    let dir = tmp.path().join("out");
    let (code, out) = micromag(&["energy-report", dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("records        11"));
}

#[test]
fn bad_input_exits_with_error() {
    let (code, _) = micromag(&["check-mesh", "/nonexistent/mesh.txt"]);
    assert_eq!(code, 2);
    let (code, _) = micromag(&["simulate", "/nonexistent/run.toml"]);
    assert_eq!(code, 2);
}
