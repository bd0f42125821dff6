//! Assumption audits. Each one is a function of the trace plus a handful of
//! run constants, so `relulab audit` reproduces the verdicts of `train`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs};
use crate::kakeya::Coverage;
use crate::trace::{self, StepRecord, TraceSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub name: String,
    pub measured: BTreeMap<String, f64>,
    pub threshold: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub notes: String,
}

impl AuditResult {
    fn new(name: &str, verdict: Verdict) -> Self {
        AuditResult {
            name: name.to_string(),
            measured: BTreeMap::new(),
            threshold: BTreeMap::new(),
            verdict,
            notes: String::new(),
        }
    }

    fn measure(mut self, k: &str, v: f64) -> Self {
        self.measured.insert(k.to_string(), v);
        self
    }

    fn limit(mut self, k: &str, v: f64) -> Self {
        self.threshold.insert(k.to_string(), v);
        self
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes = n.into();
        self
    }

    fn pass_if(cond: bool) -> Verdict {
        if cond {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Outcome of the loss-along-trajectory check, kept without the per-segment detail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathAudit {
    pub max_loss: f64,
    pub endpoint_max: f64,
    pub path_length: f64,
    pub grad_max: f64,
    pub tolerance: f64,
    pub ulb_bound: f64,
    pub holds: bool,
}

impl From<&crate::barrier::PathBarrier> for PathAudit {
    fn from(p: &crate::barrier::PathBarrier) -> Self {
        PathAudit {
            max_loss: p.max_loss,
            endpoint_max: p.endpoint_max,
            path_length: p.path_length,
            grad_max: p.grad_max,
            tolerance: p.tolerance,
            ulb_bound: p.ulb_bound,
            holds: p.ulb_holds,
        }
    }
}

/// Run constants the audits need besides the trace.
#[derive(Debug, Clone, Default)]
pub struct AuditContext {
    pub steps: u64,
    pub n_neurons: usize,
    pub n_params: usize,
    /// Count under the homogeneous lift, reported next to the raw one.
    pub n_params_lifted: usize,
    pub beta2: f64,
    /// Relative slack of the second-moment floor.
    pub floor_delta: f64,
    pub coverage: Option<Coverage>,
    pub path: Option<PathAudit>,
    /// Reference loss for the Phase-II fit.
    pub l_ref: Option<f64>,
    /// `(label, rho)` pairs from the bound report.
    pub rho: Vec<(String, f64)>,
}

pub const ANGULAR_EPS: f64 = 0.01;
pub const ANGULAR_MAX_FRACTION: f64 = 0.05;
pub const COVERAGE_EPS: f64 = 0.1;
pub const FLOOR_DELTA: f64 = 0.5;

/// Median of `min_vhat` over the second half of the run.
pub fn lambda_se_estimate(records: &[StepRecord]) -> f64 {
    let mut v: Vec<f64> = records[records.len() / 2..].iter().map(|r| r.min_vhat).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn insufficient(name: &str) -> AuditResult {
    AuditResult::new(name, Verdict::Informational).note("insufficient data")
}

pub fn run_audits(records: &[StepRecord], summary: &TraceSummary, ctx: &AuditContext) -> Vec<AuditResult> {
    let mut out = Vec::new();
    if records.len() < 2 {
        for name in ["L1", "L2", "L3", "L4", "L5", "L6", "L7", "stability_radius", "ulb_path", "phase2"] {
            out.push(insufficient(name));
        }
        return out;
    }
    let steps = records.len() as u64;
    let n = ctx.n_neurons as f64;
    let t0 = summary.t0_emp;

    // L1: flips stop strictly before the end and the final margin is positive.
    let late_flips: u64 = records.iter().filter(|r| r.t >= t0).map(|r| r.sign_flips).sum();
    out.push(
        AuditResult::new("L1", AuditResult::pass_if(t0 < steps && summary.final_margin > 0.0 && late_flips == 0))
            .measure("T0_emp", t0 as f64)
            .measure("final_margin", summary.final_margin)
            .measure("flips_after_T0", late_flips as f64)
            .limit("steps", steps as f64)
            .limit("margin_floor", 0.0),
    );

    // L2: second-moment floor after the computed burn-in.
    let lam = lambda_se_estimate(records);
    let t1 = bounds::t1_spectral(&BoundInputs {
        b_grad: Some(summary.g_max_emp),
        tau: Some(0.0),
        beta2: Some(ctx.beta2),
        delta_floor: Some(ctx.floor_delta),
        lambda_se: Some(lam),
        d_eff: Some(summary.d_eff_emp.max(1.0)),
        n_neurons: Some(n),
        ..Default::default()
    });
    let floor = (1.0 - ctx.floor_delta) * lam;
    let mut l2 = AuditResult::new("L2", Verdict::Informational)
        .measure("lambda_SE_hat", lam)
        .limit("floor", floor);
    l2 = match t1 {
        Ok(t1) => {
            l2 = l2.measure("T1", t1);
            let after: Vec<&StepRecord> = records.iter().filter(|r| (r.t as f64) >= t1).collect();
            if after.is_empty() {
                l2.note("computed T1 lies beyond the run")
            } else {
                let ok = after.iter().filter(|r| r.min_vhat >= floor).count();
                l2.measure("fraction_above_floor", ok as f64 / after.len() as f64)
            }
        }
        Err(e) => l2.note(format!("T1 unavailable: {e}")),
    };
    out.push(l2);

    // L3: effective dimension against the parameter count.
    out.push(
        AuditResult::new("L3", Verdict::Informational)
            .measure("d_eff", summary.d_eff_emp)
            .measure("ratio_to_D", summary.d_eff_emp / ctx.n_params.max(1) as f64)
            .limit("D", ctx.n_params as f64)
            .limit("D_lifted", ctx.n_params_lifted as f64),
    );

    // L4: crossings against N T0 + (N - k*) + 2k.
    let bound = n * t0 as f64 + (n - summary.k_star as f64) + 2.0 * summary.k_max as f64;
    out.push(
        AuditResult::new("L4", AuditResult::pass_if(summary.crossings as f64 <= bound))
            .measure("crossings", summary.crossings as f64)
            .measure("distinct_patterns", summary.distinct_patterns as f64)
            .measure("k_max", summary.k_max as f64)
            .measure("k_star", summary.k_star as f64)
            .limit("sparse_tope_bound", bound),
    );

    // L5: sub-Gaussian tail along the top noise direction.
    out.push(match summary.tail_frac {
        Some(tail) => AuditResult::new("L5", AuditResult::pass_if(tail <= trace::TAIL_LIMIT))
            .measure("tail_fraction", tail)
            .measure("sigma_hat", summary.sigma_hat)
            .limit("tail_fraction", trace::TAIL_LIMIT),
        None => insufficient("L5"),
    });

    // L6: angular concentration after the freeze.
    let ang = trace::angular_audit(records, ANGULAR_EPS, t0);
    out.push(if ang.steps == 0 {
        insufficient("L6")
    } else {
        AuditResult::new("L6", AuditResult::pass_if(ang.fraction_violating <= ANGULAR_MAX_FRACTION))
            .measure("fraction_violating", ang.fraction_violating)
            .measure("theta_q99", ang.theta_q99)
            .measure("steps", ang.steps as f64)
            .limit("fraction", ANGULAR_MAX_FRACTION)
            .limit("epsilon", ANGULAR_EPS)
    });

    // L7: directional coverage of the carpet.
    out.push(match &ctx.coverage {
        Some(c) => AuditResult::new("L7", Verdict::Informational)
            .measure("covered_fraction", c.covered_fraction)
            .measure("worst_gap", c.worst_gap)
            .limit("eps", COVERAGE_EPS),
        None => insufficient("L7"),
    });

    // Stability radius: no flips inside margin / (2 L_theta).
    let viol = trace::stability_violations(records);
    let inside = records.iter().filter(|r| trace::in_stability_radius(r)).count();
    out.push(
        AuditResult::new("stability_radius", AuditResult::pass_if(viol.is_empty()))
            .measure("violations", viol.len() as f64)
            .measure("steps_inside_radius", inside as f64)
            .limit("violations", 0.0),
    );

    out.push(match &ctx.path {
        Some(p) => AuditResult::new("ulb_path", AuditResult::pass_if(p.holds))
            .measure("max_loss", p.max_loss)
            .measure("endpoint_max", p.endpoint_max)
            .measure("path_length", p.path_length)
            .measure("grad_max", p.grad_max)
            .limit("ulb_bound", p.ulb_bound)
            .limit("tolerance", p.tolerance)
            .note("grad_max is the sampled stand-in for the global Lipschitz constant"),
        None => insufficient("ulb_path"),
    });

    out.push(phase2(records, t0, ctx));

    let affine = trace::affine_error_audit(records);
    out.push(
        AuditResult::new("affine_error", Verdict::Informational)
            .measure("total_error", affine.total_error)
            .measure("total_sq_step", affine.total_sq_step)
            .measure("fitted_constant", affine.fitted_constant)
            .measure("steps", affine.steps as f64),
    );

    let lyap = trace::lyapunov_audit(records, t0);
    out.push(
        AuditResult::new("lyapunov", Verdict::Informational)
            .measure("kappa_hat", lyap.kappa_hat)
            .measure("violations", lyap.violations as f64)
            .measure("checked", lyap.checked as f64),
    );
    out
}

/// Least-squares fit of `ln(L_t - L_ref)` over `t > t0`.
fn phase2(records: &[StepRecord], t0: u64, ctx: &AuditContext) -> AuditResult {
    let l_ref = ctx
        .l_ref
        .unwrap_or_else(|| records.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min));
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.t > t0 && r.loss > l_ref)
        .map(|r| (r.t as f64, (r.loss - l_ref).ln()))
        .unzip();
    let mut res = AuditResult::new("phase2", Verdict::Informational).measure("L_ref", l_ref);
    for (label, rho) in &ctx.rho {
        res = res.limit(label, *rho);
    }
    if xs.len() < 2 {
        return res.note("insufficient data");
    }
    let slope = crate::kakeya::ls_slope(&xs, &ys);
    res.measure("fitted_contraction", slope.exp())
        .measure("fit_points", xs.len() as f64)
}
