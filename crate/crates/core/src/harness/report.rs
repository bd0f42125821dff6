//! Merges run directories into one JSON document plus per-quantity CSV
//! tables for external plotting.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt;
use crate::harness::experiment::{REPORT_FILE, TRACE_FILE};
use crate::trace::{self, StepRecord};

pub const MERGED_FILE: &str = "merged.json";

/// Checked-in JSON schema for `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Serialize)]
struct MergedRun {
    run: String,
    report: serde_json::Value,
}

#[derive(Serialize)]
struct Merged {
    runs: Vec<MergedRun>,
}

fn run_name(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

type Column = (&'static str, fn(&StepRecord, u64) -> String);

fn write_table(path: &Path, runs: &[(String, Vec<StepRecord>)], cols: &[Column]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut header = vec!["run", "t"];
    header.extend(cols.iter().map(|c| c.0));
    w.write_record(&header).map_err(csv_err)?;
    for (name, records) in runs {
        let mut cumulative = 0u64;
        for (i, r) in records.iter().enumerate() {
            let changed = if i == 0 {
                r.sign_flips > 0
            } else {
                r.pattern_hashes != records[i - 1].pattern_hashes
            };
            cumulative += changed as u64;
            let mut row = vec![name.clone(), r.t.to_string()];
            row.extend(cols.iter().map(|c| (c.1)(r, cumulative)));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Files written by [`merge_runs`].
pub const TABLES: [&str; 4] = ["margins.csv", "crossings.csv", "cosine.csv", "vmin.csv"];

/// Reads `report.json` and `trace.jsonl` from each run directory and writes
/// `merged.json` plus the CSV tables into `out`.
pub fn merge_runs(run_dirs: &[PathBuf], out: &Path) -> Result<()> {
    if run_dirs.is_empty() {
        return Err(Error::Empty("no run directories given".into()));
    }
    fs::create_dir_all(out)?;
    let mut merged = Merged { runs: Vec::new() };
    let mut traces = Vec::new();
    for dir in run_dirs {
        let text = fs::read_to_string(dir.join(REPORT_FILE))?;
        let report: serde_json::Value = serde_json::from_str(&text)?;
        merged.runs.push(MergedRun {
            run: run_name(dir),
            report,
        });
        let records = trace::read_jsonl(BufReader::new(File::open(dir.join(TRACE_FILE))?))?;
        traces.push((run_name(dir), records));
    }
    fs::write(out.join(MERGED_FILE), fmt::to_json_pretty(&merged)? + "\n")?;
    write_table(
        &out.join(TABLES[0]),
        &traces,
        &[("margin", |r, _| fmt::sig17(r.margin))],
    )?;
    write_table(
        &out.join(TABLES[1]),
        &traces,
        &[
            ("sign_flips", |r, _| r.sign_flips.to_string()),
            ("crossings", |_, c| c.to_string()),
        ],
    )?;
    write_table(
        &out.join(TABLES[2]),
        &traces,
        &[("cos_prev", |r, _| fmt::sig17(r.cos_prev))],
    )?;
    write_table(
        &out.join(TABLES[3]),
        &traces,
        &[("min_vhat", |r, _| fmt::sig17(r.min_vhat))],
    )?;
    Ok(())
}
