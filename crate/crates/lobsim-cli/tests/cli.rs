//! End-to-end checks of the binary: manifests, exit codes and byte-level
//! determinism of repeated commands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lobsim")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_dir_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(read_dir_files(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

#[test]
fn incentives_command_emits_ten_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("inc");
    let status = run(&[
        "incentives",
        "--out",
        out.to_str().unwrap(),
        "--horizon",
        "2",
    ]);
    assert!(status.status.success(), "{status:?}");
    let csv = std::fs::read_to_string(out.join("incentives.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("limit,distance,incentive"));
    assert_eq!(lines.count(), 10);
    assert!(out.join("schedule.csv").exists());
    assert!(out.join("effective_config.cfg").exists());
    assert!(out.join("admissibility.txt").exists());
}

#[test]
fn value_command_emits_field_and_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("val");
    let status = run(&[
        "value",
        "--out",
        out.to_str().unwrap(),
        "--horizon",
        "2",
        "--paths",
        "2000",
    ]);
    assert!(status.status.success(), "{status:?}");
    let field = std::fs::read_to_string(out.join("pfield.csv")).unwrap();
    assert!(field.starts_with("t,x,p\n"));
    assert!(out.join("oracle.txt").exists());
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "[book]\nalpha_a = 0.3\n").unwrap();
    let out = run(&[
        "incentives",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("alpha"), "{msg}");
    // nonexistent config file is an i/o error
    let out = run(&["incentives", "--config", "/nonexistent.cfg"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn stability_errors_exit_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    // dx that does not divide the domain
    let out = run(&[
        "value",
        "--out",
        tmp.path().join("o").to_str().unwrap(),
        "--dx",
        "3e-3",
        "--horizon",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn validate_runs_clean_and_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out1 = tmp.path().join("v1");
    let out2 = tmp.path().join("v2");
    let a = run(&[
        "validate",
        "--out",
        out1.to_str().unwrap(),
        "--seed",
        "42",
    ]);
    assert!(a.status.success(), "{a:?}");
    let b = run(&[
        "validate",
        "--out",
        out2.to_str().unwrap(),
        "--seed",
        "42",
    ]);
    assert!(b.status.success(), "{b:?}");
    assert_eq!(a.stdout, b.stdout);
    let ca = std::fs::read(out1.join("checks.txt")).unwrap();
    let cb = std::fs::read(out2.join("checks.txt")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8_lossy(&ca);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn sweep_builtin_writes_four_scenarios_and_flags_directions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let result = run(&[
        "sweep",
        "--builtin",
        "--out",
        out.to_str().unwrap(),
        "--paths",
        "2",
        "--seed",
        "7",
    ]);
    for name in ["baseline", "eta_half", "beta_x5", "alpha_x2"] {
        let dir = out.join(name);
        assert!(dir.join("incentives.csv").exists(), "missing {name}");
        assert!(dir.join("shape_with.csv").exists());
        assert!(dir.join("shape_without.csv").exists());
        assert!(dir.join("validation.txt").exists());
        assert!(dir.join("effective_config.cfg").exists());
    }
    assert!(out.join("sensitivity.txt").exists());
    // two of the three published sensitivity directions contradict the
    // closed form at these parameters, so the sweep exits 4; only the
    // diffusion direction holds.
    assert_eq!(result.status.code(), Some(4), "{result:?}");
    let sens = std::fs::read_to_string(out.join("sensitivity.txt")).unwrap();
    assert!(sens.contains("eta_half limit 1"), "{sens}");
    assert!(sens.lines().any(|l| l.contains("eta_half") && l.contains("PASS")));
    assert!(sens.lines().any(|l| l.contains("beta_x5") && l.contains("FAIL")));
    assert!(sens.lines().any(|l| l.contains("alpha_x2") && l.contains("FAIL")));
}

#[test]
fn sweep_repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out1 = tmp.path().join("s1");
    let out2 = tmp.path().join("s2");
    for out in [&out1, &out2] {
        let result = run(&[
            "sweep",
            "--builtin",
            "--out",
            out.to_str().unwrap(),
            "--paths",
            "2",
            "--seed",
            "11",
            "--horizon",
            "2",
            "--format",
            "csv+svg",
        ]);
        // horizon 2 is too short for the solver to reach stationarity, so
        // the oracle check fails and the exit code is 4; files are written
        assert_eq!(result.status.code(), Some(4));
    }
    let files1 = read_dir_files(&out1);
    let files2 = read_dir_files(&out2);
    assert_eq!(files1.len(), files2.len());
    let mut compared = 0;
    for (a, b) in files1.iter().zip(files2.iter()) {
        assert_eq!(
            a.strip_prefix(&out1).unwrap(),
            b.strip_prefix(&out2).unwrap()
        );
        if a.file_name().unwrap() == "summary.txt" {
            continue; // wall-clock timings
        }
        assert_eq!(
            std::fs::read(a).unwrap(),
            std::fs::read(b).unwrap(),
            "{a:?} differs"
        );
        compared += 1;
    }
    assert!(compared > 20, "only {compared} files compared");
}

#[test]
fn simulate_command_emits_shapes_volumes_objective() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let status = run(&[
        "simulate",
        "--out",
        out.to_str().unwrap(),
        "--paths",
        "2",
        "--horizon",
        "1",
        "--dt",
        "5e-3",
        "--format",
        "csv+svg",
    ]);
    assert!(status.status.success(), "{status:?}");
    for name in [
        "shape_with.csv",
        "shape_without.csv",
        "volumes_with.csv",
        "volumes_without.csv",
        "objective.txt",
        "shape.svg",
        "effective_config.cfg",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let volumes = std::fs::read_to_string(out.join("volumes_with.csv")).unwrap();
    assert!(volumes.starts_with("limit,side,volume\n"));
    assert_eq!(volumes.lines().count(), 1 + 20); // 10 limits x 2 sides
}

#[test]
fn custom_scenario_file_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("quiet.cfg");
    std::fs::write(
        &cfg,
        "\
[book]
sigma_a = 0.1
sigma_b = 0.1

[scenario]
name = quiet
overrides = lambda0=25000
n_paths = 2
horizon = 1
dt = 5e-3
",
    )
    .unwrap();
    let out = tmp.path().join("custom");
    let result = run(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    // a single scenario has no baseline to compare against: no direction
    // checks, but the short horizon fails the oracle gate
    assert!(out.join("quiet/incentives.csv").exists());
    let eff = std::fs::read_to_string(out.join("quiet/effective_config.cfg")).unwrap();
    assert!(eff.contains("sigma_a = 0.1"), "{eff}");
    assert!(eff.contains("lambda0 = 25000"), "{eff}");
    assert_eq!(result.status.code(), Some(4), "{result:?}");
}
