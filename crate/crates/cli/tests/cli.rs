use std::path::Path;
use std::process::{Command, Output};

use cpo_cli::output::parse_float;
use serde_json::Value;
use tempfile::TempDir;

const MINIMAL: &str = "[atom]\n[medium]\n";

fn cpo_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpo-sim"))
        .args(args)
        .output()
        .expect("spawn cpo-sim")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run(scenario: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![scenario, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cpo_sim(&args)
}

fn metadata(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metadata.json")).unwrap()).unwrap()
}

#[test]
fn spectrum_run_succeeds_and_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let o = run("spectrum", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["spectrum.csv", "metadata.json", "report.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let meta = metadata(&out);
    assert_eq!(meta["complete"], Value::Bool(true));
    assert_eq!(meta["scenario"], "spectrum");
    let defaults = meta["defaults"].as_array().unwrap();
    assert!(defaults.iter().any(|d| d.as_str().unwrap().starts_with("atom.gamma1=")));
}

#[test]
fn csv_floats_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    assert_eq!(run("spectrum", &cfg, &out, &[]).status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "delta");
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), header.len());
        let delta = parse_float(cells[0]).expect("float cell");
        assert_eq!(cpo_cli::output::format_float(delta), cells[0]);
        rows += 1;
    }
    assert_eq!(rows, 801);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run("wn-check", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run("wn-check", &cfg, &b, &[]).status.code(), Some(0));
    for f in ["wn_analytic.csv", "wn_numeric.csv", "report.json", "metadata.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn sweep_output_independent_of_jobs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run("sweep", &cfg, &a, &["--jobs", "1"]).status.code(), Some(0));
    assert_eq!(run("sweep", &cfg, &b, &["--jobs", "3"]).status.code(), Some(0));
    let sweep = std::fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(sweep, std::fs::read_to_string(b.join("sweep.csv")).unwrap());
    assert!(sweep.starts_with("a,delta,x_numeric,x_analytic,direction\n"));
    assert_eq!(sweep.lines().count(), 1 + 3 * 2);
}

#[test]
fn failed_check_exits_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    // the linear expansion no longer holds over this distance
    let o = run("deflect", &cfg, &out, &["--override", "beam.length=60"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL full_vs_analytic"));
    let meta = metadata(&out);
    assert_eq!(meta["complete"], Value::Bool(true));
    assert_eq!(meta["passed"], Value::Bool(false));
}

#[test]
fn runtime_error_exits_one_with_incomplete_metadata() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let o = run("deflect", &cfg, &out, &["--override", "beam.length=200"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("boundary contamination"));
    let meta = metadata(&out);
    assert_eq!(meta["complete"], Value::Bool(false));
    assert!(meta["error"].as_str().unwrap().contains("boundary"));
    assert!(!out.join("report.json").exists());
}

#[test]
fn missing_block_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[atom]\n");
    let o = run("soliton", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("medium"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[atom]\ngamma3 = 1.0\n[medium]\n");
    let o = run("spectrum", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma3"));
}

#[test]
fn invalid_parameter_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[atom]\ngamma2 = -1.0\n[medium]\n");
    let o = run("spectrum", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma2"));
}

#[test]
fn missing_config_file_exits_one() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.toml");
    let o = run("spectrum", missing.to_str().unwrap(), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn override_changes_inputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let o = run("spectrum", &cfg, &out, &["--override", "spectrum.points=101"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(text.lines().count(), 102);
    assert_eq!(metadata(&out)["inputs"]["spectrum"]["points"], 101);
}
