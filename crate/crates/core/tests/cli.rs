//! Exit codes and output of the command-line binary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_photonic-eig"))
}

const SMALL: &str = r#"
experiment = "linear"
model = { kind = "constant", value = 8.0 }
tol = 1e-9

[schedule]
steps_per_mesh = 2
max_level = 1
max_steps = 60

[reference]
enabled = false
"#;

#[test]
fn usage_and_io_errors_exit_with_one() {
    assert_eq!(bin().arg("--bogus").output().unwrap().status.code(), Some(1));
    let out = bin().args(["run", "--config", "/nonexistent/cfg.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cfg.toml"));
}

#[test]
fn run_writes_a_trace_and_non_convergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let csv = dir.path().join("trace.csv");
    let status = bin()
        .args(["--threads", "1", "run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("j,mesh_level,dofs,mu,lambda,rel_err,residual_dual,wall_seconds\n"));

    std::fs::write(&cfg, SMALL.replace("max_steps = 60", "max_steps = 3")).unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&csv).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_passes() {
    let out = bin().arg("check").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 10);
}
