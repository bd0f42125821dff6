mod common;

use std::fs;
use std::process::Command;

fn relulab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relulab"))
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = relulab().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = relulab().args(["bounds", "--nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn arrangement_reports_tight_count() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("lines.txt");
    fs::write(&f, common::generic_three_lines_text()).unwrap();
    let out = relulab().args(["arrangement", "--tope", "--file"]).arg(&f).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("exact 7, bound 7, tight"), "{text}");
    assert!(text.contains("tope diameter 3"), "{text}");
}

#[test]
fn bounds_table_prints_gen_gap() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("in.json");
    fs::write(
        &f,
        r#"{"G_lip": 1, "R_data": 1, "B_step": 1, "d_eff": 4, "delta_conf": 0.05, "n_samples": 1000}"#,
    )
    .unwrap();
    let out = relulab().args(["bounds", "--in"]).arg(&f).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("gen_gap")).expect("gen_gap row");
    assert!(line.contains("2.1045"), "{line}");

    let out = relulab().args(["bounds", "--json", "--bound", "n_samples=4000", "--in"]).arg(&f).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = v["bounds"].as_array().unwrap().iter().find(|r| r["name"] == "gen_gap").unwrap();
    assert!((row["value"].as_f64().unwrap() - 2.1044701389113668 / 2.0).abs() < 1e-12);
}

#[test]
fn bad_bound_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("in.json");
    fs::write(&f, r#"{"unknown_thing": 1}"#).unwrap();
    let out = relulab().args(["bounds", "--in"]).arg(&f).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn train_honours_report_dir_env_and_audit_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/reference.cfg");
    let out = relulab()
        .env("RELULAB_REPORT_DIR", &run)
        .args(["train", "--config", cfg, "--set", "steps=150"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("trace.jsonl").exists());
    assert!(run.join("report.json").exists());
    let train_text = String::from_utf8(out.stdout).unwrap();

    let out = relulab().args(["audit", "--dir"]).arg(&run).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let audit_text = String::from_utf8(out.stdout).unwrap();
    // The audit lines of `train` follow its one-line summary.
    let train_audits: Vec<&str> = train_text.lines().skip(1).filter(|l| !l.starts_with("wrote")).collect();
    assert_eq!(train_audits, audit_text.lines().collect::<Vec<_>>());

    let out = relulab()
        .args(["barrier", "--config", cfg, "--resolution", "16", "--from"])
        .arg(run.join("initial.json"))
        .arg("--to")
        .arg(run.join("final.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("max_loss"));

    let out = relulab().args(["kakeya", "--n-dirs", "64", "--trajectory"]).arg(run.join("trajectory.jsonl")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let k: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(k["coverage"]["n_dirs"], 64);
}
