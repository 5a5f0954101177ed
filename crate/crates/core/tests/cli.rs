mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn maskpool(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("tiny.toml");
    if !cfg.exists() {
        std::fs::write(&cfg, common::tiny_config().to_toml()).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_maskpool"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn error_kind(out: &Output) -> String {
    let line = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("not JSON: {line}"));
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn gen_data_writes_a_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = maskpool(dir.path(), &["gen-data"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ds = maskpool::bench::load_dataset(&dir.path().join("out/dataset.mpds")).unwrap();
    assert_eq!(ds.num_classes, 6);
    let shifted = maskpool(dir.path(), &["gen-data", "--shifted"]);
    assert!(shifted.status.success());
    assert!(dir.path().join("out/dataset-shifted.mpds").exists());
}

#[test]
fn unknown_scenario_fails_with_a_json_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = maskpool(dir.path(), &["run", "table-9"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "unknown_scenario");
}

#[test]
fn smsp_against_a_missing_pool() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("no-pool");
    let out = maskpool(dir.path(), &["--pool", absent.to_str().unwrap(), "smsp", "--classes", "0,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "missing_pool");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = maskpool(dir.path(), &["amp"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn amp_save_then_smsp_and_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool");
    let p = pool.to_str().unwrap();
    for classes in ["0,1", "2,3"] {
        let out = maskpool(dir.path(), &["--pool", p, "amp", "--classes", classes, "--l1", "0.1", "--save"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let lines = json_lines(&out);
        assert!(lines[0]["record_id"].as_u64().is_some(), "{lines:?}");
    }
    let out = maskpool(dir.path(), &["--pool", p, "smsp", "--classes", "4,5", "--neighbors", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let acc = json_lines(&out)[0]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let out = maskpool(dir.path(), &["--pool", p, "overlap", "--a", "1", "--b", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let overlap = json_lines(&out)[0]["overlap"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&overlap));

    let out = maskpool(dir.path(), &["baseline-random", "--classes", "4,5"]);
    assert!(out.status.success());
}

#[test]
fn run_writes_reports_and_report_collects_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = maskpool(dir.path(), &["run", "neighbor-ablation"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/neighbor-ablation.md").exists());
    let out = maskpool(dir.path(), &["report"]);
    assert!(out.status.success());
    let report = std::fs::read_to_string(dir.path().join("out/REPORT.md")).unwrap();
    assert!(report.contains("neighbor-ablation"));
}
