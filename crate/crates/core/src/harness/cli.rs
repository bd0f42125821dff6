//! Command-line front end. Usage errors exit with 2, runtime failures with 1.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::arrangement::{self, Arrangement};
use crate::barrier::{self, DEFAULT_RESOLUTION};
use crate::bounds::{self, BoundInputs, EvalOptions};
use crate::error::{Error, Result};
use crate::fmt;
use crate::harness::audit::{AuditResult, Verdict};
use crate::harness::config::{self, apply_bound_overrides, ExperimentConfig, REPORT_DIR_ENV};
use crate::harness::dataset::generate_dataset;
use crate::harness::experiment::{self, KakeyaOptions, REPORT_FILE, TRACE_FILE, TRAJECTORY_FILE};
use crate::harness::report;
use crate::kakeya::DirectionSampler;
use crate::trace;

#[derive(Parser, Debug)]
#[command(name = "relulab", version, about = "Instrumented Adam training of small ReLU networks")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))
}

#[derive(Args, Debug)]
struct BoundOverrides {
    /// Replace a bound input, e.g. `--bound mu=0.5` (repeatable).
    #[arg(long = "bound", value_parser = parse_pair)]
    bound: Vec<(String, String)>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report_dir: Option<PathBuf>,
        /// Override a config key, e.g. `--set steps=100` (repeatable).
        #[arg(long = "set", value_parser = parse_pair)]
        set: Vec<(String, String)>,
        #[command(flatten)]
        overrides: BoundOverrides,
    },
    /// Recompute audits from a run directory or a trace plus its config.
    Audit {
        /// Run directory holding report.json, trace.jsonl and trajectory.jsonl.
        #[arg(long, conflicts_with_all = ["config", "trace"])]
        dir: Option<PathBuf>,
        #[arg(long, requires = "trace")]
        config: Option<PathBuf>,
        #[arg(long, requires = "config")]
        trace: Option<PathBuf>,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        overrides: BoundOverrides,
    },
    /// Evaluate every formula on a JSON object of bound inputs.
    Bounds {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        horizon: Option<u64>,
        /// Emit the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        overrides: BoundOverrides,
    },
    /// Enumerate the cells of an arrangement file and compare with Zaslavsky.
    Arrangement {
        #[arg(long)]
        file: PathBuf,
        /// Also report the tope-graph diameter.
        #[arg(long)]
        tope: bool,
    },
    /// Loss barrier on the segment between two checkpoints.
    Barrier {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
    },
    /// Carpet analysis of a trajectory's steps.
    Kakeya {
        #[arg(long)]
        trajectory: PathBuf,
        /// First step to include.
        #[arg(long, default_value_t = 0)]
        from: usize,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 512)]
        n_dirs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Plain pseudo-random directions instead of the low-discrepancy set.
        #[arg(long)]
        monte_carlo: bool,
        #[arg(long)]
        fatten: Option<f64>,
    },
    /// Merge run directories into merged.json and CSV tables.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return e.exit_code();
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn overrides_map(o: &BoundOverrides) -> Result<std::collections::BTreeMap<String, serde_json::Value>> {
    o.bound
        .iter()
        .map(|(k, v)| Ok((k.clone(), config::parse_override_value(k, v)?)))
        .collect()
}

fn print_audits(out: &mut dyn Write, audits: &[AuditResult]) -> Result<()> {
    for a in audits {
        let v = match a.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Informational => "info",
        };
        let measured: Vec<String> = a.measured.iter().map(|(k, x)| format!("{k}={x}")).collect();
        writeln!(out, "{:<18} {v:<5} {}", a.name, measured.join(" "))?;
        if !a.notes.is_empty() {
            writeln!(out, "{:<18}       {}", "", a.notes)?;
        }
    }
    Ok(())
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Train {
            config,
            report_dir,
            set,
            overrides,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?.with_overrides(&set)?;
            cfg.bound_overrides.extend(overrides_map(&overrides)?);
            cfg.resolve_report_dir(std::env::var(REPORT_DIR_ENV).ok());
            if let Some(d) = report_dir {
                cfg.report_dir = Some(d);
            }
            let run = experiment::run_experiment(&cfg)?;
            let s = &run.summary;
            writeln!(
                out,
                "steps {} loss {} -> {} T0_emp {} crossings {} margin {}",
                s.steps, s.initial_loss, s.final_loss, s.t0_emp, s.crossings, s.final_margin
            )?;
            print_audits(out, &run.audits)?;
            if let Some(d) = &cfg.report_dir {
                writeln!(out, "wrote {}", d.display())?;
            }
        }
        Command::Audit {
            dir,
            config,
            trace: trace_path,
            trajectory,
            overrides,
        } => {
            let (mut cfg, trace_path, trajectory) = match dir {
                Some(d) => {
                    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join(REPORT_FILE))?)?;
                    let cfg: ExperimentConfig = serde_json::from_value(report["config"].clone())
                        .map_err(|e| Error::Parse(format!("config in report: {e}")))?;
                    let traj = trajectory.or_else(|| Some(d.join(TRAJECTORY_FILE)).filter(|p| p.exists()));
                    (cfg, d.join(TRACE_FILE), traj)
                }
                None => (
                    ExperimentConfig::from_file(&config.expect("clap requires config"))?,
                    trace_path.expect("clap requires trace"),
                    trajectory,
                ),
            };
            cfg.bound_overrides.extend(overrides_map(&overrides)?);
            let records = trace::read_jsonl(BufReader::new(File::open(&trace_path)?))?;
            let traj = trajectory.map(|p| experiment::read_trajectory(&p)).transpose()?;
            let data = generate_dataset(&cfg.dataset, &cfg.net.layer_dims)?;
            let (_, _, _, audits, _, _) = experiment::audit_trace(&cfg, &records, traj.as_deref(), &data, None)?;
            print_audits(out, &audits)?;
        }
        Command::Bounds {
            input,
            horizon,
            json,
            overrides,
        } => {
            let text = fs::read_to_string(&input)?;
            let inputs: BoundInputs =
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", input.display())))?;
            let inputs = apply_bound_overrides(&inputs, &overrides_map(&overrides)?)?;
            let report = bounds::evaluate_all(
                &inputs,
                &EvalOptions {
                    horizon,
                    step_norms: Vec::new(),
                },
            );
            if json {
                writeln!(out, "{}", fmt::to_json_pretty(&report)?)?;
            } else {
                for r in &report.bounds {
                    let flag = if r.asymptotic { "  (up to constants)" } else { "" };
                    writeln!(out, "{:<24} {:.4}  [{}]{flag}", r.name, r.value, r.paper_ref)?;
                }
                for s in &report.skipped {
                    writeln!(out, "skipped {s}")?;
                }
            }
        }
        Command::Arrangement { file, tope } => {
            let arr = Arrangement::parse(&fs::read_to_string(&file)?)?;
            let check = arrangement::verify_zaslavsky(&arr)?;
            writeln!(
                out,
                "exact {}, bound {}, {}",
                check.exact,
                check.bound,
                if check.tight { "tight" } else { "not tight" }
            )?;
            if tope {
                let regions = arrangement::enumerate_regions(&arr)?;
                let g = arrangement::tope_graph(&regions.cells)?;
                writeln!(out, "tope diameter {}, edges {}", g.diameter, g.edges.len())?;
            }
        }
        Command::Barrier {
            config,
            from,
            to,
            resolution,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let data = generate_dataset(&cfg.dataset, &cfg.net.layer_dims)?;
            let a = experiment::load_checkpoint(&from)?;
            let b = experiment::load_checkpoint(&to)?;
            let s = barrier::segment_barrier(&a, &b, &data, resolution)?;
            writeln!(
                out,
                "max_loss {} at alpha {} endpoint_max {} excess {}",
                s.max_loss,
                s.argmax_alpha,
                s.endpoint_max,
                s.excess()
            )?;
        }
        Command::Kakeya {
            trajectory,
            from,
            rank,
            eps,
            n_dirs,
            seed,
            monte_carlo,
            fatten,
        } => {
            let traj = experiment::read_trajectory(&trajectory)?;
            let deltas = experiment::trajectory_deltas(&traj);
            if from >= deltas.len() {
                return Err(Error::domain(format!("--from {from} is past the last step")));
            }
            let opts = KakeyaOptions {
                n_dirs,
                eps,
                sampler: if monte_carlo {
                    DirectionSampler::MonteCarlo { seed }
                } else {
                    DirectionSampler::Halton { seed }
                },
                fatten_radius: fatten,
                ..Default::default()
            };
            let k = experiment::analyze_deltas(&deltas[from..], rank, &opts)?;
            writeln!(out, "{}", fmt::to_json_pretty(&k)?)?;
        }
        Command::Report { out: dir, runs } => {
            report::merge_runs(&runs, &dir)?;
            writeln!(out, "wrote {}", dir.display())?;
        }
    }
    Ok(())
}
