//! Integration tests of the command-line surface: exit codes, file
//! formats, determinism, and the raster invariant.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eitmono")
}

fn write_small_config(dir: &Path, phantom: &str, extra: &str) -> PathBuf {
    let phantom_path = dir.join("phantom.json");
    std::fs::write(&phantom_path, phantom).unwrap();
    let config = format!(
        r#"{{
  "mesh": {{ "target_h": 0.06, "sim_refine": 1.4 }},
  "electrodes": {{ "k": 8, "coverage": 0.5 }},
  "contact_impedance": 0.1,
  "basis": "gram_schmidt",
  "background": 1.0,
  "phantom_file": "phantom.json",
  "data_file": "data.csv",
  "cells": {{ "diam": 0.25 }},
  {extra}
  "noise": {{ "sigma": 0.0, "seed": 1 }}
}}"#
    );
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    path
}

const TWO_DISKS: &str = r#"{
  "gamma0": 1.0,
  "inclusions": [
    { "shape": "disk", "center": [-0.4, -0.3], "radius": 0.3, "contrast": 1.0, "sign": "conductive" },
    { "shape": "disk", "center": [0.4, 0.3], "radius": 0.25, "contrast": 1.0, "sign": "conductive" }
  ]
}"#;

const HOMOGENEOUS: &str = r#"{ "gamma0": 1.0, "inclusions": [] }"#;

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), TWO_DISKS, r#""reconstruction": { "algorithm": 1, "beta": 0.5, "mu": 1.001 },"#);
    let out_dir = dir.path().join("out");
    let args = ["simulate", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    run_ok(&args);
    let first = std::fs::read(out_dir.join("data.csv")).unwrap();
    run_ok(&args);
    let second = std::fs::read(out_dir.join("data.csv")).unwrap();
    assert_eq!(first, second, "noiseless rerun must be bit-identical");
    // Sidecar carries the metadata line.
    let meta = std::fs::read_to_string(out_dir.join("data.csv.meta")).unwrap();
    assert!(meta.starts_with("8 gram_schmidt"));
}

#[test]
fn noisy_simulation_logs_half_percent_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), TWO_DISKS, r#""reconstruction": { "algorithm": 1, "beta": 0.5, "mu": 1.01 },"#);
    let out_dir = dir.path().join("out");
    let out = run_ok(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "noise.sigma=5e-3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find(|l| l.contains("relative_error="))
        .expect("missing relative error log");
    let value: f64 = line
        .split("relative_error=")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(value > 2.5e-3 && value < 1e-2, "relative error {value}");
}

#[test]
fn missing_phantom_is_a_config_error_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), TWO_DISKS, r#""reconstruction": { "algorithm": 1, "beta": 0.5, "mu": 1.001 },"#);
    std::fs::remove_file(dir.path().join("phantom.json")).unwrap();
    let out = run(&["simulate", "--config", config.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("phantom.json"), "error must name the path: {stderr}");
}

#[test]
fn data_and_config_must_agree_on_electrode_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), TWO_DISKS, r#""reconstruction": { "algorithm": 1, "beta": 0.5, "mu": 1.001 },"#);
    let out_dir = dir.path().join("out");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let out = run(&[
        "reconstruct",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "electrodes.k=16",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k = 8"));
}

#[test]
fn homogeneous_data_with_zero_alpha_yields_empty_field_and_black_image() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(
        dir.path(),
        HOMOGENEOUS,
        r#""reconstruction": { "algorithm": 1, "beta": 0.8, "mu": 1.0, "fixed_alpha": 0.0 },"#,
    );
    let out_dir = dir.path().join("out");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    run_ok(&["reconstruct", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let csv = std::fs::read_to_string(out_dir.join("indicator.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let v: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
    let pgm = std::fs::read(out_dir.join("indicator.pgm")).unwrap();
    let header_end = pgm.iter().filter(|&&b| b == b'\n').count();
    assert!(header_end >= 3);
    let body = &pgm[pgm.len() - 256 * 256..];
    assert!(body.iter().all(|&b| b == 0), "image must be all black");
}

#[test]
fn raster_is_a_pure_function_of_the_indicator_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), TWO_DISKS, r#""reconstruction": { "algorithm": 1, "beta": 0.5, "mu": 1.001 },"#);
    let out_dir = dir.path().join("out");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    run_ok(&["reconstruct", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let field = eit_core::monotonicity::IndicatorField::read_csv(&out_dir.join("indicator.csv"), 0.25, 0.0).unwrap();
    let rendered = eit_cli::pgm::render(&field.centers, &field.values, 0.25);
    let written = std::fs::read(out_dir.join("indicator.pgm")).unwrap();
    assert_eq!(&written[written.len() - 256 * 256..], &rendered[..], "re-rendering must be byte-exact");
}

#[test]
fn resistive_reconstruction_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let resistive = r#"{
      "gamma0": 1.0,
      "inclusions": [
        { "shape": "disk", "center": [-0.4, -0.3], "radius": 0.3, "contrast": 0.5, "sign": "resistive" },
        { "shape": "disk", "center": [0.4, 0.3], "radius": 0.25, "contrast": 0.5, "sign": "resistive" }
      ]
    }"#;
    let config = write_small_config(
        dir.path(),
        resistive,
        r#""reconstruction": { "algorithm": 2, "beta": [-0.03, -0.05, -0.07], "mu": 0.99998, "sign": "resistive" },"#,
    );
    let out_dir = dir.path().join("out");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    run_ok(&["reconstruct", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out_dir.join("indicator.csv").exists());
}

#[test]
fn dipole_basis_preset_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), TWO_DISKS, r#""reconstruction": { "algorithm": 2, "beta": [0.2, 0.3, 0.4], "mu": 1.02 },"#);
    let out_dir = dir.path().join("out");
    run_ok(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "basis=dipole",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    run_ok(&[
        "reconstruct",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "basis=dipole",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
}

#[test]
fn l_shape_support_concentrates_on_the_inclusion() {
    let dir = tempfile::tempdir().unwrap();
    let l_shape = r#"{
      "gamma0": 1.0,
      "inclusions": [
        { "shape": "polygon", "vertices": [[-0.45,-0.45],[0.45,-0.45],[0.45,0.0],[0.0,0.0],[0.0,0.45],[-0.45,0.45]], "contrast": 1.0, "sign": "conductive" }
      ]
    }"#;
    let config = write_small_config(dir.path(), l_shape, r#""reconstruction": { "algorithm": 1, "beta": 0.8, "mu": 1.001 },"#);
    let out_dir = dir.path().join("out");
    run_ok(&[
        "simulate", "--config", config.to_str().unwrap(),
        "--set", "electrodes.k=12", "--set", "mesh.target_h=0.03",
        "--out", out_dir.to_str().unwrap(),
    ]);
    run_ok(&[
        "reconstruct", "--config", config.to_str().unwrap(),
        "--set", "electrodes.k=12", "--set", "mesh.target_h=0.03", "--set", "cells.diam=0.12",
        "--out", out_dir.to_str().unwrap(),
    ]);
    let field = eit_core::monotonicity::IndicatorField::read_csv(&out_dir.join("indicator.csv"), 0.12, 0.0).unwrap();
    let support = field.support();
    assert!(!support.is_empty(), "support must be nonempty");
    let in_l = support
        .iter()
        .filter(|&&i| {
            let c = field.centers[i];
            c.x >= -0.45 && c.x <= 0.45 && c.y >= -0.45 && c.y <= 0.45 && !(c.x > 0.0 && c.y > 0.0)
        })
        .count();
    assert!(
        in_l * 2 >= support.len(),
        "support must concentrate on the inclusion: {in_l} of {}",
        support.len()
    );
}

#[test]
fn convergence_single_k_and_unsorted_list() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("phantom.json"), TWO_DISKS).unwrap();
    let config = r#"{
  "mesh": { "target_h": 0.06 },
  "electrodes": { "k": 8, "coverage": 0.5 },
  "background": 1.0,
  "phantom_file": "phantom.json",
  "convergence": { "ks": [8], "cm_target_h": 0.06, "grid_n": 1024 }
}"#;
    let path = dir.path().join("config.json");
    std::fs::write(&path, config).unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&["convergence", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let csv = std::fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "one data row expected");
    assert!(lines[1].ends_with(','), "ratio column must be empty: {}", lines[1]);

    let out = run(&[
        "convergence",
        "--config",
        path.to_str().unwrap(),
        "--set",
        "convergence.ks=[16,8]",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "unsorted electrode counts must be a config error");
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert!(
        out.status.success(),
        "selftest failed: {}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("properties passed"));
    assert!(!stdout.contains("FAIL"));
}
