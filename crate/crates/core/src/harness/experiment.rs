//! One instrumented training run and everything derived from it.

use std::collections::{BTreeMap, VecDeque};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barrier::{self, PathSpec};
use crate::bounds::{self, BoundInputs, BoundReport, BoundRow, EvalOptions};
use crate::error::{Error, Result};
use crate::fmt;
use crate::harness::audit::{self, AuditContext, AuditResult, PathAudit};
use crate::harness::config::{apply_bound_overrides, AuditKind, ExperimentConfig};
use crate::harness::dataset::generate_dataset;
use crate::kakeya::{self, BoxCount, Coverage, DirectionSampler, DudleyGap};
use crate::linalg;
use crate::optim::{self, OptimFlags, OptimState, Schedule};
use crate::relunet::{self, Dataset, Params};
use crate::trace::{self, Extras, StepInput, StepRecord, TraceSummary, Tracer};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";
pub const CARPET_FILE: &str = "carpet.jsonl";
pub const FINAL_CHECKPOINT: &str = "final.json";
pub const INITIAL_CHECKPOINT: &str = "initial.json";
pub const LSTAR_FILE: &str = "lstar.json";

const PROBE_SALT: u64 = 0x7072_6f62_6573;
const COVERAGE_DIRS: usize = 512;
const MAX_CARPET_RANK: usize = 8;

/// Directional, dimension and covering analysis of a set of step vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KakeyaReport {
    pub target_rank: usize,
    pub achieved_rank: usize,
    pub reduced_rank: bool,
    pub segments: usize,
    /// Carpet units per parameter-space unit.
    pub scale: f64,
    pub coverage: Coverage,
    pub fatten_radius: f64,
    pub box_scales: Vec<f64>,
    pub box_counting: Option<BoxCount>,
    /// Minkowski floor `d_eff - 1/2` for a genuine Kakeya set, printed for comparison only.
    pub dimension_floor: f64,
    /// `(eps, count)` in parameter-space units.
    pub cover_profile: Vec<(f64, u64)>,
    pub dudley: Option<DudleyGap>,
    pub notes: Vec<String>,
}

pub struct KakeyaOptions {
    pub n_dirs: usize,
    pub eps: f64,
    pub sampler: DirectionSampler,
    /// Defaults to the smallest box scale.
    pub fatten_radius: Option<f64>,
    pub n_samples: Option<u64>,
    pub lipschitz_product: Option<f64>,
}

impl Default for KakeyaOptions {
    fn default() -> Self {
        KakeyaOptions {
            n_dirs: COVERAGE_DIRS,
            eps: audit::COVERAGE_EPS,
            sampler: DirectionSampler::default(),
            fatten_radius: None,
            n_samples: None,
            lipschitz_product: None,
        }
    }
}

const BOX_SCALES: [f64; 5] = [0.5, 0.25, 0.125, 0.0625, 0.03125];
const MAX_CARPET_POINTS: usize = 20_000;
const MAX_COVER_POINTS: usize = 4_000;

/// Points along the carpet segments spaced at most `spacing` apart, capped
/// by striding.
fn carpet_points(carpet: &kakeya::Carpet, spacing: f64) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    for (a, b) in &carpet.segments {
        let len = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let pieces = ((len / spacing).ceil() as usize).max(1);
        for i in 0..pieces {
            let s = i as f64 / pieces as f64;
            pts.push(a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect());
        }
    }
    if let Some((_, b)) = carpet.segments.last() {
        pts.push(b.clone());
    }
    stride(pts, MAX_CARPET_POINTS)
}

fn stride(pts: Vec<Vec<f64>>, cap: usize) -> Vec<Vec<f64>> {
    if pts.len() <= cap {
        return pts;
    }
    let step = pts.len().div_ceil(cap);
    pts.into_iter().step_by(step).collect()
}

pub fn analyze_deltas(deltas: &[Vec<f64>], target_rank: usize, opts: &KakeyaOptions) -> Result<KakeyaReport> {
    let refs: Vec<&[f64]> = deltas.iter().map(|d| d.as_slice()).collect();
    let build = kakeya::build_carpet(&refs, target_rank)?;
    let carpet = &build.carpet;
    let mut notes = Vec::new();
    if build.reduced_rank {
        notes.push(format!(
            "carpet rank {} below requested {target_rank}",
            build.achieved_rank
        ));
    }
    let coverage = kakeya::directional_coverage(carpet, opts.n_dirs, opts.eps, opts.sampler)?;
    let fatten = opts.fatten_radius.unwrap_or(BOX_SCALES[BOX_SCALES.len() - 1]);
    let points = carpet_points(carpet, fatten);
    let box_counting = match kakeya::box_counting_dimension(&points, &BOX_SCALES) {
        Ok(b) => Some(b),
        Err(e) => {
            notes.push(format!("box counting skipped: {e}"));
            None
        }
    };
    let cover_pts = stride(points, MAX_COVER_POINTS);
    let eps: Vec<f64> = (0..7).map(|j| 0.5f64.powi(j)).collect();
    let counts = kakeya::covering_profile(&cover_pts, &eps)?;
    let cover_profile: Vec<(f64, u64)> = eps.iter().map(|e| e / carpet.scale).zip(counts).collect();
    let dudley = match (opts.n_samples, opts.lipschitz_product) {
        (Some(n), Some(lp)) => {
            let cc: Vec<(f64, f64)> = cover_profile.iter().map(|&(e, c)| (e, c as f64)).collect();
            Some(kakeya::dudley_gap(&cc, n, lp, Some(build.achieved_rank as f64))?)
        }
        _ => None,
    };
    Ok(KakeyaReport {
        target_rank,
        achieved_rank: build.achieved_rank,
        reduced_rank: build.reduced_rank,
        segments: carpet.segments.len(),
        scale: carpet.scale,
        coverage,
        fatten_radius: fatten,
        box_scales: BOX_SCALES.to_vec(),
        box_counting,
        dimension_floor: build.achieved_rank as f64 - 0.5,
        cover_profile,
        dudley,
        notes,
    })
}

pub fn write_carpet<W: Write>(mut w: W, carpet: &kakeya::Carpet) -> Result<()> {
    #[derive(Serialize)]
    struct Seg<'a> {
        start: &'a [f64],
        end: &'a [f64],
    }
    for (a, b) in &carpet.segments {
        writeln!(w, "{}", fmt::to_json_line(&Seg { start: a, end: b })?)?;
    }
    w.flush()?;
    Ok(())
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub data: Dataset,
    pub records: Vec<StepRecord>,
    /// `theta_0 ..= theta_T`.
    pub trajectory: Vec<Params>,
    pub summary: TraceSummary,
    pub bound_inputs: BoundInputs,
    pub bounds: BoundReport,
    pub audits: Vec<AuditResult>,
    pub kakeya: Option<KakeyaReport>,
    pub path: Option<PathAudit>,
    pub l_ref: f64,
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a ExperimentConfig,
    optim_flags: OptimFlags,
    summary: &'a TraceSummary,
    bound_inputs: &'a BoundInputs,
    bounds: &'a BoundReport,
    audits: &'a [AuditResult],
    kakeya: &'a Option<KakeyaReport>,
    path: &'a Option<PathAudit>,
    l_ref: f64,
}

impl RunOutput {
    pub fn report_json(&self) -> Result<String> {
        Ok(fmt::to_json_pretty(&RunReport {
            config: &self.config,
            optim_flags: self.config.optim.flags(),
            summary: &self.summary,
            bound_inputs: &self.bound_inputs,
            bounds: &self.bounds,
            audits: &self.audits,
            kakeya: &self.kakeya,
            path: &self.path,
            l_ref: self.l_ref,
        })?)
    }

    pub fn deltas(&self) -> Vec<Vec<f64>> {
        trajectory_deltas(&self.trajectory)
    }
}

pub fn trajectory_deltas(trajectory: &[Params]) -> Vec<Vec<f64>> {
    trajectory
        .windows(2)
        .map(|w| w[1].as_slice().iter().zip(w[0].as_slice()).map(|(a, b)| a - b).collect())
        .collect()
}

/// The whole training set when it fits in `probe_size`, else a seeded subsample.
pub fn probe_inputs(data: &Dataset, probe_size: usize, seed: u64) -> Vec<Vec<f64>> {
    if data.len() <= probe_size {
        return data.inputs.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PROBE_SALT);
    let mut idx = rand::seq::index::sample(&mut rng, data.len(), probe_size).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| data.inputs[i].clone()).collect()
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for it in items {
        writeln!(w, "{}", fmt::to_json_line(it)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Vec<Params>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Params = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("trajectory line {}: {e}", i + 1)))?;
        out.push(checked(p)?);
    }
    Ok(out)
}

fn checked(p: Params) -> Result<Params> {
    let dims = p.dims().to_vec();
    Params::from_flat(&dims, p.into_vec())
}

pub fn load_checkpoint(path: &Path) -> Result<Params> {
    let text = fs::read_to_string(path)?;
    let p: Params = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    checked(p)
}

/// Best loss recorded for the task in `dir`, merged with `own`, written back.
fn shared_reference_loss(dir: Option<&Path>, key: &str, own: f64) -> Result<f64> {
    let Some(dir) = dir else { return Ok(own) };
    let path = dir.join(LSTAR_FILE);
    let mut table: BTreeMap<String, f64> = match fs::read_to_string(&path) {
        Ok(t) => serde_json::from_str(&t).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
        Err(e) => return Err(e.into()),
    };
    let best = table.get(key).map_or(own, |&v| v.min(own));
    table.insert(key.to_string(), best);
    fs::write(&path, fmt::to_json_pretty(&table)? + "\n")?;
    Ok(best)
}

/// Constants measured on the run, in the slots the bound formulas read.
pub fn measured_inputs(cfg: &ExperimentConfig, data: &Dataset, records: &[StepRecord], summary: &TraceSummary, n_neurons: usize, n_params: usize, path: Option<&PathAudit>) -> BoundInputs {
    let pos = |v: f64| (v > 0.0 && v.is_finite()).then_some(v);
    let (gamma, kappa) = match cfg.optim.schedule {
        Schedule::LogPower { gamma, kappa } => (Some(gamma), Some(kappa)),
        Schedule::Power { .. } => (None, None),
    };
    let r_data = data
        .inputs
        .iter()
        .map(|x| linalg::norm2(x))
        .fold(0.0, f64::max);
    BoundInputs {
        n_neurons: Some(n_neurons as f64),
        n_params: Some(n_params as f64),
        d_eff: pos(summary.d_eff_emp),
        m: pos(summary.final_margin),
        gamma,
        kappa,
        tau: Some(0.0),
        delta_conf: Some(0.05),
        delta_floor: Some(audit::FLOOR_DELTA),
        lambda_se: pos(audit::lambda_se_estimate(records)),
        beta1: Some(cfg.optim.beta1),
        beta2: Some(cfg.optim.beta2),
        k: Some(summary.k_max as f64),
        k_star: Some(summary.k_star as f64),
        theta_ang: pos(summary.theta_ang_q99),
        c_ang: Some(1.0),
        g_max: Some(summary.g_max_emp),
        g_lip: Some(path.map_or(summary.g_max_emp, |p| p.grad_max)),
        r_data: Some(r_data),
        b_step: Some(summary.b_step),
        n_samples: Some(data.len() as f64),
        t0: Some(summary.t0_emp as f64),
        p_path: Some(summary.path_len_l2),
        holder_alpha: Some(1.0),
        b_grad: Some(summary.g_max_emp),
        ..Default::default()
    }
}

/// Bound rows plus the theoretical-T0 variant of the contraction factor.
fn evaluate_bounds(inputs: &BoundInputs, steps: u64, step_norms: Vec<f64>) -> BoundReport {
    let mut report = bounds::evaluate_all(
        inputs,
        &EvalOptions {
            horizon: Some(steps),
            step_norms,
        },
    );
    if let Some(t0) = report.get("T0_cutoff").map(|r| r.value) {
        let theo = BoundInputs {
            t0: Some(t0),
            ..inputs.clone()
        };
        match bounds::rho_rate(&theo) {
            Ok(r) => {
                let mut used = BTreeMap::new();
                for (k, v) in [("gamma", theo.gamma), ("mu", theo.mu), ("kappa", theo.kappa), ("T0", Some(t0))] {
                    if let Some(v) = v {
                        used.insert(k.to_string(), v);
                    }
                }
                report.bounds.push(BoundRow {
                    name: "rho_theoretical_T0".into(),
                    value: r.rho,
                    inputs: used,
                    asymptotic: false,
                    paper_ref: "Theorem: Global Convergence Rate".into(),
                });
            }
            Err(e) => report.skipped.push(format!("rho_theoretical_T0: {e}")),
        }
    }
    report
}

fn rho_rows(report: &BoundReport) -> Vec<(String, f64)> {
    [("rho", "rho_empirical_T0"), ("rho_theoretical_T0", "rho_theoretical_T0")]
        .iter()
        .filter_map(|(row, label)| report.get(row).map(|r| (label.to_string(), r.value)))
        .collect()
}

/// Runs the audits and bounds on an existing trace. `trajectory` and
/// `data` enable the path and carpet analyses.
pub fn audit_trace(
    cfg: &ExperimentConfig,
    records: &[StepRecord],
    trajectory: Option<&[Params]>,
    data: &Dataset,
    l_ref: Option<f64>,
) -> Result<(TraceSummary, BoundInputs, BoundReport, Vec<AuditResult>, Option<KakeyaReport>, Option<PathAudit>)> {
    let dims = &cfg.net.layer_dims;
    let n_neurons: usize = dims[1..dims.len() - 1].iter().sum();
    let n_params: usize = dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
    let n_params_lifted: usize = dims.windows(2).map(|w| (w[1] + 1) * (w[0] + 1)).sum();
    let summary = trace::summarize(records, &[], n_neurons)?;
    let wants = |k: AuditKind| cfg.audits.contains(&k);

    let path = match trajectory {
        Some(traj) if wants(AuditKind::Barrier) && traj.len() >= 2 => {
            let spec = PathSpec::new(traj.to_vec(), cfg.path_resolution)?;
            Some(PathAudit::from(&barrier::path_barrier(&spec, data)?))
        }
        _ => None,
    };

    let kakeya = match trajectory {
        Some(traj) if (wants(AuditKind::Kakeya) || wants(AuditKind::L7)) && traj.len() >= 2 => {
            let all = trajectory_deltas(traj);
            let from = (summary.t0_emp as usize).min(all.len().saturating_sub(1));
            let mut tail: Vec<Vec<f64>> = all[from..].to_vec();
            if tail.iter().all(|d| d.iter().all(|&x| x == 0.0)) {
                tail = all;
            }
            let target = (summary.d_eff_emp.ceil() as usize).clamp(1, MAX_CARPET_RANK);
            let r_data = data.inputs.iter().map(|x| linalg::norm2(x)).fold(0.0, f64::max);
            let g = path.as_ref().map_or(summary.g_max_emp, |p| p.grad_max);
            let opts = KakeyaOptions {
                n_samples: Some(data.len() as u64),
                lipschitz_product: Some(g * r_data),
                ..Default::default()
            };
            match analyze_deltas(&tail, target, &opts) {
                Ok(k) => Some(k),
                Err(e) => {
                    log::warn!("carpet analysis skipped: {e}");
                    None
                }
            }
        }
        _ => None,
    };

    let measured = measured_inputs(cfg, data, records, &summary, n_neurons, n_params, path.as_ref());
    let inputs = apply_bound_overrides(&measured, &cfg.bound_overrides)?;
    let bounds = if wants(AuditKind::Bounds) {
        evaluate_bounds(&inputs, records.len() as u64, records.iter().map(|r| r.delta_norm2).collect())
    } else {
        BoundReport::default()
    };

    let ctx = AuditContext {
        steps: cfg.steps,
        n_neurons,
        n_params,
        n_params_lifted,
        beta2: cfg.optim.beta2,
        floor_delta: audit::FLOOR_DELTA,
        coverage: kakeya.as_ref().map(|k| k.coverage.clone()),
        path,
        l_ref,
        rho: rho_rows(&bounds),
    };
    let selected: Vec<AuditResult> = audit::run_audits(records, &summary, &ctx)
        .into_iter()
        .filter(|a| match a.name.as_str() {
            "L1" => wants(AuditKind::L1),
            "L2" => wants(AuditKind::L2),
            "L3" => wants(AuditKind::L3),
            "L4" => wants(AuditKind::L4),
            "L5" => wants(AuditKind::L5),
            "L6" => wants(AuditKind::L6),
            "L7" => wants(AuditKind::L7),
            "ulb_path" => wants(AuditKind::Barrier),
            _ => true,
        })
        .collect();
    let kakeya = if wants(AuditKind::Kakeya) { kakeya } else { None };
    Ok((summary, inputs, bounds, selected, kakeya, path))
}

/// Trains, records every step, and derives the summary, bounds and audits.
/// Files go to `config.report_dir` when it is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let data = generate_dataset(&config.dataset, &config.net.layer_dims)?;
    let mut params = Params::init(&config.net)?;
    let probes = probe_inputs(&data, config.probe_size, config.dataset.seed);
    let mut tracer = Tracer::new(probes, &params)?;
    let mut state = OptimState::new(params.len());
    let mut records: Vec<StepRecord> = Vec::with_capacity(config.steps as usize);
    let mut trajectory = vec![params.clone()];
    let mut window: VecDeque<Vec<f64>> = VecDeque::with_capacity(config.window);
    let dir = config.report_dir.as_deref();
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }

    for t in 0..config.steps {
        let stepped = relunet::loss_and_grad(&params, &data)
            .and_then(|(loss, grad)| {
                if !loss.is_finite() {
                    return Err(Error::numeric("non-finite loss"));
                }
                let st = optim::adam_step(&params, &grad, &state, &config.optim)?;
                Ok((loss, grad, st))
            })
            .map_err(|e| e.at_step(t));
        let (loss, grad, step) = match stepped {
            Ok(v) => v,
            Err(e) => {
                if let Some(d) = dir {
                    trace::write_jsonl(BufWriter::new(File::create(d.join(TRACE_FILE))?), &records)?;
                }
                return Err(e);
            }
        };
        if window.len() == config.window {
            window.pop_front();
        }
        window.push_back(grad.as_slice().to_vec());
        let mut extras = Extras::default();
        if (t + 1) % config.window as u64 == 0 {
            let refs: Vec<&[f64]> = window.iter().map(|g| g.as_slice()).collect();
            extras.d_eff = Some(trace::effective_dimension(&refs, config.window)?.value);
            if data.len() >= trace::MIN_NOISE_SAMPLES {
                let per = relunet::per_example_grads(&params, &data)?;
                let refs: Vec<&[f64]> = per.iter().map(|g| g.as_slice()).collect();
                let est = trace::subgaussian_sigma(&refs)?;
                extras.sigma_hat = Some(est.sigma);
                extras.tail_frac = Some(est.tail_fraction);
            }
        }
        let rec = tracer.record(
            StepInput {
                alpha: step.alpha,
                loss,
                params_before: &params,
                params_after: &step.params,
                grad: &grad,
                min_vhat: step.state.min_vhat(config.optim.beta2),
            },
            extras,
        )?;
        records.push(rec);
        params = step.params;
        state = step.state;
        trajectory.push(params.clone());
    }

    let own_best = records.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
    let l_ref = shared_reference_loss(dir, &config.task_key(), own_best)?;
    let (summary, bound_inputs, bounds, audits, kakeya, path) =
        audit_trace(config, &records, Some(&trajectory), &data, Some(l_ref))?;
    let out = RunOutput {
        config: config.clone(),
        data,
        records,
        trajectory,
        summary,
        bound_inputs,
        bounds,
        audits,
        kakeya,
        path,
        l_ref,
    };
    if let Some(d) = dir {
        write_outputs(d, &out)?;
    }
    Ok(out)
}

fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    trace::write_jsonl(BufWriter::new(File::create(dir.join(TRACE_FILE))?), &out.records)?;
    write_lines(&dir.join(TRAJECTORY_FILE), &out.trajectory)?;
    fs::write(dir.join(SUMMARY_FILE), fmt::to_json_pretty(&out.summary)? + "\n")?;
    fs::write(dir.join(REPORT_FILE), out.report_json()? + "\n")?;
    fs::write(dir.join(INITIAL_CHECKPOINT), fmt::to_json_pretty(&out.trajectory[0])? + "\n")?;
    fs::write(
        dir.join(FINAL_CHECKPOINT),
        fmt::to_json_pretty(out.trajectory.last().expect("non-empty"))? + "\n",
    )?;
    if let Some(k) = &out.kakeya {
        let deltas = out.deltas();
        let from = (out.summary.t0_emp as usize).min(deltas.len().saturating_sub(1));
        let refs: Vec<&[f64]> = deltas[from..].iter().map(|d| d.as_slice()).collect();
        if let Ok(b) = kakeya::build_carpet(&refs, k.target_rank) {
            write_carpet(BufWriter::new(File::create(dir.join(CARPET_FILE))?), &b.carpet)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(steps: u64) -> ExperimentConfig {
        ExperimentConfig {
            net: relunet::NetConfig {
                layer_dims: vec![2, 4, 1],
                init_scale: 1.0,
                seed: 1,
            },
            steps,
            window: 8,
            dataset: crate::harness::dataset::DatasetSpec {
                n_samples: 40,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn one_step_run() {
        let out = run_experiment(&small(1)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.trajectory.len(), 2);
        assert!(out
            .audits
            .iter()
            .all(|a| a.verdict == crate::harness::Verdict::Informational));
    }

    #[test]
    fn short_run_is_deterministic() {
        let a = run_experiment(&small(40)).unwrap();
        let b = run_experiment(&small(40)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.report_json().unwrap(), b.report_json().unwrap());
        assert!(a.records.iter().filter(|r| r.d_eff.is_some()).count() == 5);
    }

    #[test]
    fn probes_subsample_when_large() {
        let data = generate_dataset(&small(1).dataset, &[2, 4, 1]).unwrap();
        assert_eq!(probe_inputs(&data, 100, 0).len(), 40);
        let p = probe_inputs(&data, 10, 0);
        assert_eq!(p.len(), 10);
        assert_eq!(p, probe_inputs(&data, 10, 0));
    }
}
