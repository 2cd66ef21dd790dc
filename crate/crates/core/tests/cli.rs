//! End-to-end tests of the command-line binary: exit codes, artifact
//! layout, overrides, determinism, and sweep aggregation.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_critnls");

const BASE_CFG: &str = r#"
experiment = "classify"
output = "out"

[model]
kind = "matched_section4"
r0 = 1.0

[params]
mu_l = 1.0
mu_s = 0.0
theta = 0.0
r = 60.0
delta0 = 0.25
n = 1

[grid]
n = 1
npts = 1024
l = 100.0

[solver]
dt0 = 0.01
t_max = 10000.0
gamma = 2.0
snapshots = [1.0, 2.0, 4.0]

[initial]
kind = "gaussian"
amplitude = 1.0
width = 1.0

[classify]
theta3 = [3.0]
"#;

fn write_cfg(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, BASE_CFG).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn classify_subcommand_exits_zero_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out = dir.path().join("artifacts");
    let res = run(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&res.stdout),
        String::from_utf8_lossy(&res.stderr)
    );
    for name in ["manifest.json", "classify.json", "config.resolved.toml"] {
        assert!(out.join(name).exists(), "missing {name}");
    }
}

#[test]
fn invalid_config_exits_two_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out = dir.path().join("artifacts");
    let res = run(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--override",
        "solver.gamma=0.2",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("gamma"), "stderr: {stderr}");
}

#[test]
fn subcommand_overrides_experiment_field() {
    // config says classify; the zeta subcommand must win
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out = dir.path().join("artifacts");
    let res = run(&[
        "zeta",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(out.join("zeta.csv").exists());
    assert!(out.join("matching.json").exists());
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(v["experiment"], "zeta");
    // matched model: wronskian holds to tolerance
    assert!(v["headline"]["wronskian_max_dev"].as_f64().unwrap() < 1e-8);
}

#[test]
fn reruns_are_bit_identical_on_data_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let res = run(&[
            "classify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success());
    }
    for name in ["classify.json", "config.resolved.toml"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out = dir.path().join("sweep");
    let res = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--axis",
        "params.theta",
        "--values",
        "0.0,0.5",
        "--jobs",
        "2",
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.starts_with("params.theta,ok"));
    assert!(out.join("params.theta_0.0/manifest.json").exists());
    assert!(out.join("params.theta_0.5/manifest.json").exists());
}

#[test]
fn sweep_with_unknown_axis_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out = dir.path().join("sweep");
    let res = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--axis",
        "params.bogus",
        "--values",
        "1,2",
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bogus"));
}

#[test]
fn leibniz_subcommand_runs_a_small_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out = dir.path().join("artifacts");
    let res = run(&[
        "leibniz",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--override",
        "leibniz.corpus=4",
        "--override",
        "grid.npts=128",
        "--override",
        "grid.l=20.0",
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = std::fs::read_to_string(out.join("leibniz.csv")).unwrap();
    // header + 3 gammas x 2 terms x 4 functions
    assert_eq!(csv.lines().count(), 1 + 24, "{csv}");
}

#[test]
fn propagate_subcommand_emits_decay_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out = dir.path().join("artifacts");
    let res = run(&[
        "propagate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--override",
        "solver.t_max=4.0",
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = std::fs::read_to_string(out.join("dispersive.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,sup,abs_zeta2");
    assert_eq!(csv.lines().count(), 4, "{csv}");
    assert!(out.join("u_final.field").exists());
}
