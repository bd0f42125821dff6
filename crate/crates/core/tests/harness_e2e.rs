mod common;

use std::fs;

use relulab::harness::experiment::{REPORT_FILE, TRACE_FILE};
use relulab::harness::report::{self, MERGED_FILE, REPORT_SCHEMA, TABLES};
use relulab::harness::{run_experiment, ExperimentConfig, Verdict};
use relulab::trace;

fn short_config(steps: u64, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = common::reference_config();
    cfg.steps = steps;
    cfg.report_dir = Some(dir.to_path_buf());
    cfg
}

#[test]
fn report_matches_schema_and_trace_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_experiment(&short_config(300, dir.path())).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap()).unwrap();
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    if let Err(errors) = compiled.validate(&report) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("schema violations: {msgs:?}");
    }
    let text = fs::read_to_string(dir.path().join(TRACE_FILE)).unwrap();
    let records = trace::read_jsonl(text.as_bytes()).unwrap();
    assert_eq!(records, run.records);
    assert_eq!(records.len(), 300);
    // Every float is written with 17 significant digits.
    let mut again = Vec::new();
    trace::write_jsonl(&mut again, &records).unwrap();
    assert_eq!(again, text.as_bytes());
}

#[test]
fn report_dir_does_not_leak_into_the_report() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&short_config(60, a.path())).unwrap();
    run_experiment(&short_config(60, b.path())).unwrap();
    for f in [TRACE_FILE, REPORT_FILE] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn reference_run_freezes_and_passes_core_audits() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::reference_config();
    cfg.report_dir = Some(dir.path().to_path_buf());
    let run = run_experiment(&cfg).unwrap();
    assert!(run.summary.final_loss < run.summary.initial_loss);
    let verdict = |name: &str| run.audits.iter().find(|a| a.name == name).unwrap().verdict;
    for name in ["L1", "L4", "stability_radius", "ulb_path"] {
        assert_eq!(verdict(name), Verdict::Pass, "{name}");
    }
}

#[test]
fn merged_report_and_tables() {
    let root = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["a", "b"].iter().map(|n| root.path().join(n)).collect();
    for (i, r) in runs.iter().enumerate() {
        let mut cfg = short_config(40, r);
        cfg.net.seed = i as u64 + 1;
        run_experiment(&cfg).unwrap();
    }
    let out = root.path().join("merged");
    report::merge_runs(&runs, &out).unwrap();
    let merged: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(MERGED_FILE)).unwrap()).unwrap();
    assert_eq!(merged["runs"].as_array().unwrap().len(), 2);
    for t in TABLES {
        let mut rdr = csv::Reader::from_path(out.join(t)).unwrap();
        assert_eq!(&rdr.headers().unwrap()[0], "run");
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 80, "{t}");
        assert_eq!(&rows[0][0], "a");
        assert_eq!(&rows[79][0], "b");
    }
}

#[test]
fn empty_merge_is_an_error() {
    let root = tempfile::tempdir().unwrap();
    assert!(report::merge_runs(&[], root.path()).is_err());
}
