mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{locations_path, reference_path};

fn ibvs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibvs"))
        .args(args)
        .env_remove("IBVS_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn short_reference(dir: &Path) -> String {
    let text = fs::read_to_string(reference_path()).unwrap().replace("max_steps = 500", "max_steps = 20");
    let path = dir.join("short.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&ibvs(&["--help"])), 0);
    assert_eq!(code(&ibvs(&["--version"])), 0);
    assert_eq!(code(&ibvs(&["run", "--help"])), 0);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&ibvs(&[])), 1);
    assert_eq!(code(&ibvs(&["frobnicate"])), 1);
    assert_eq!(code(&ibvs(&["run"])), 1);
    assert_eq!(code(&ibvs(&["run", "--scenario", "/nonexistent/scenario.toml"])), 1);
}

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let scn = short_reference(dir.path());
    let out = dir.path().join("out");
    let res = ibvs(&["run", "--scenario", &scn, "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("reference_cbc_seed4.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 21);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("reference_cbc_seed4.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 4);
    assert_eq!(json["summary"]["steps"], 20);
}

#[test]
fn run_honours_the_output_directory_variable() {
    let dir = tempfile::tempdir().unwrap();
    let scn = short_reference(dir.path());
    let out = dir.path().join("from_env");
    let res = Command::new(env!("CARGO_BIN_EXE_ibvs"))
        .args(["run", "--scenario", &scn, "--mode", "unfiltered"])
        .env("IBVS_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(code(&res), 0);
    assert!(out.join("reference_unfiltered_seed1.csv").exists());
}

#[test]
fn missing_field_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(reference_path()).unwrap().replace("max_steps = 500\n", "");
    let path = dir.path().join("broken.toml");
    fs::write(&path, text).unwrap();
    let res = ibvs(&["check", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("max_steps"));
}

#[test]
fn check_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(reference_path())
        .unwrap()
        .replace("q = 1.0", "q = -1.0")
        .replace("[[0.2, 0.05, -0.2], [0.4, 0.05, -0.2], ", "[");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let res = ibvs(&["check", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("Q must be symmetric positive semidefinite"), "{stdout}");
    assert!(stdout.contains("features"), "{stdout}");
    assert_eq!(code(&ibvs(&["check", "--scenario", reference_path().to_str().unwrap()])), 0);
}

#[test]
fn sweep_rejects_zero_trials_and_jobs() {
    let scn = reference_path();
    let locs = locations_path();
    let base = ["sweep", "--scenario", scn.to_str().unwrap(), "--locations", locs.to_str().unwrap()];
    let with = |extra: &[&str]| {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        code(&ibvs(&args))
    };
    assert_eq!(with(&["--trials", "0"]), 1);
    assert_eq!(with(&["--jobs", "0"]), 1);
    assert_eq!(with(&["--sigma", "1.5"]), 1);
}

#[test]
fn unknown_oracle_suite_is_a_usage_error() {
    let res = ibvs(&["oracle", "--suite", "everything"]);
    assert_eq!(code(&res), 1);
    assert_eq!(code(&ibvs(&["oracle", "--suite", "quantile"])), 0);
}
