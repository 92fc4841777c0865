//! Exit codes and artifacts of the `vsg-lab` binary.

use std::path::Path;
use std::process::Command;

fn lab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vsg-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let out = dir.path().join("run");
    assert!(lab(&["preset", "--grid", "inductive", "--controller", "pi-droop", "--out", s(&cfg)])
        .status
        .success());
    let text = std::fs::read_to_string(&cfg).unwrap().replace("\"duration\": 25.0", "\"duration\": 2.0");
    std::fs::write(&cfg, text).unwrap();
    let o = lab(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["timeseries.csv", "metrics.json", "report.txt", "p_full.svg", "q_zoom.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rows = std::fs::read_to_string(out.join("timeseries.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2001);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"grid": "inductive", "unexpected": 1}"#).unwrap();
    let o = lab(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let o = lab(&["simulate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_files_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = lab(&["simulate", "--config", s(&missing), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    let o = lab(&["evaluate", "--model", s(&missing), "--data", s(&missing)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn npc_config_with_missing_model_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("npc.json");
    assert!(lab(&["preset", "--grid", "resistive", "--controller", "npc", "--out", s(&cfg)])
        .status
        .success());
    let o = lab(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn collect_train_evaluate_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("collect.json");
    let data = dir.path().join("data.csv");
    let model = dir.path().join("model.json");
    assert!(lab(&["preset", "--grid", "inductive", "--collection", "--out", s(&cfg)]).status.success());
    let o = lab(&["collect", "--config", s(&cfg), "--duration", "3", "--seed", "4", "--out", s(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lab(&[
        "train", "--data", s(&data), "--epochs", "2", "--lr", "1e-3", "--seed", "1", "--out", s(&model),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lab(&["evaluate", "--model", s(&model), "--data", s(&data)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("freq_err"));
}

#[test]
fn gradcheck_passes() {
    let o = lab(&["gradcheck", "--seed", "3", "--nets", "2", "--samples", "2"]);
    assert!(o.status.success());
}

#[test]
fn compare_rejects_mismatched_grids() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    lab(&["preset", "--grid", "inductive", "--controller", "pi-droop", "--out", s(&a)]);
    lab(&["preset", "--grid", "resistive", "--controller", "pi-droop", "--out", s(&b)]);
    let list = format!("{},{}", s(&a), s(&b));
    let o = lab(&["compare", "--configs", &list, "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}
