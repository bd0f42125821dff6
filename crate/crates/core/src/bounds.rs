//! Closed-form evaluation of the region-crossing, burn-in, rate, barrier and
//! generalization formulas on measured or supplied constants.
//!
//! Rows whose formula is only known up to a constant carry `asymptotic: true`
//! and are evaluated with constant 1; they are never used as hard
//! inequalities.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every constant a formula may consume. Unset fields are `None`; a formula
/// that needs an unset or out-of-range field fails with a domain error naming it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundInputs {
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n_neurons: Option<f64>,
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub n_params: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_eff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(rename = "L_smooth", skip_serializing_if = "Option::is_none")]
    pub l_smooth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(rename = "C_conv", skip_serializing_if = "Option::is_none")]
    pub c_conv: Option<f64>,
    #[serde(rename = "C_q", skip_serializing_if = "Option::is_none")]
    pub c_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_conf: Option<f64>,
    /// Relative slack `delta` of the second-moment floor `(1 - delta) lambda_SE`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_floor: Option<f64>,
    #[serde(rename = "lambda_SE", skip_serializing_if = "Option::is_none")]
    pub lambda_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_ang: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_ang: Option<f64>,
    #[serde(rename = "G_max", skip_serializing_if = "Option::is_none")]
    pub g_max: Option<f64>,
    #[serde(rename = "D1", skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
    #[serde(rename = "D2", skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    #[serde(rename = "G_lip", skip_serializing_if = "Option::is_none")]
    pub g_lip: Option<f64>,
    #[serde(rename = "R_data", skip_serializing_if = "Option::is_none")]
    pub r_data: Option<f64>,
    #[serde(rename = "B_step", skip_serializing_if = "Option::is_none")]
    pub b_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<f64>,
    #[serde(rename = "T0", skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(rename = "P_path", skip_serializing_if = "Option::is_none")]
    pub p_path: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eps_adv: Vec<f64>,
    #[serde(rename = "B_grad", skip_serializing_if = "Option::is_none")]
    pub b_grad: Option<f64>,
    /// Weight-norm bound; carried for reporting, no formula consumes it.
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b_weight: Option<f64>,
}

/// Named range checks used by the formulas.
mod check {
    pub fn any(_: f64) -> bool {
        true
    }
    pub fn pos(v: f64) -> bool {
        v > 0.0
    }
    pub fn nonneg(v: f64) -> bool {
        v >= 0.0
    }
    pub fn count(v: f64) -> bool {
        v >= 0.0 && v.fract() == 0.0
    }
    pub fn beta(v: f64) -> bool {
        (0.0..1.0).contains(&v)
    }
}

fn need(name: &str, v: Option<f64>, ok: fn(f64) -> bool, range: &str) -> Result<f64> {
    match v {
        None => Err(Error::domain(format!("{name} is required but not set"))),
        Some(x) if !x.is_finite() => Err(Error::domain(format!("{name} must be finite"))),
        Some(x) if !ok(x) => Err(Error::domain(format!("{name} = {x} is outside {range}"))),
        Some(x) => Ok(x),
    }
}

/// Helper that records each consumed input for the report row.
struct Used<'a> {
    inputs: &'a BoundInputs,
    used: BTreeMap<String, f64>,
}

impl<'a> Used<'a> {
    fn new(inputs: &'a BoundInputs) -> Self {
        Used {
            inputs,
            used: BTreeMap::new(),
        }
    }

    fn get(&mut self, name: &str, ok: fn(f64) -> bool, range: &str) -> Result<f64> {
        let v = need(name, self.inputs.field(name), ok, range)?;
        self.used.insert(name.to_string(), v);
        Ok(v)
    }

    fn put(&mut self, name: &str, v: f64) {
        self.used.insert(name.to_string(), v);
    }
}

impl BoundInputs {
    fn field(&self, name: &str) -> Option<f64> {
        match name {
            "N" => self.n_neurons,
            "D" => self.n_params,
            "d_eff" => self.d_eff,
            "mu" => self.mu,
            "L_smooth" => self.l_smooth,
            "m" => self.m,
            "gamma" => self.gamma,
            "kappa" => self.kappa,
            "C_conv" => self.c_conv,
            "C_q" => self.c_q,
            "tau" => self.tau,
            "delta_conf" => self.delta_conf,
            "delta_floor" => self.delta_floor,
            "lambda_SE" => self.lambda_se,
            "beta1" => self.beta1,
            "beta2" => self.beta2,
            "k" => self.k,
            "k_star" => self.k_star,
            "theta_ang" => self.theta_ang,
            "c_ang" => Some(self.c_ang.unwrap_or(1.0)),
            "G_max" => self.g_max,
            "D1" => self.d1,
            "D2" => self.d2,
            "G_lip" => self.g_lip,
            "R_data" => self.r_data,
            "B_step" => self.b_step,
            "n_samples" => self.n_samples,
            "T0" => self.t0,
            "P_path" => self.p_path,
            "holder_alpha" => self.holder_alpha,
            "B_grad" => self.b_grad,
            "B" => self.b_weight,
            _ => None,
        }
    }
}

/// One evaluated formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub name: String,
    pub value: f64,
    pub inputs: BTreeMap<String, f64>,
    pub asymptotic: bool,
    pub paper_ref: String,
}

impl BoundRow {
    fn new(name: &str, value: f64, used: Used<'_>, asymptotic: bool, reference: &str) -> Self {
        BoundRow {
            name: name.to_string(),
            value,
            inputs: used.used,
            asymptotic,
            paper_ref: reference.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bounds: Vec<BoundRow>,
    /// Formulas that could not be evaluated, with the reason.
    pub skipped: Vec<String>,
}

impl BoundReport {
    pub fn get(&self, name: &str) -> Option<&BoundRow> {
        self.bounds.iter().find(|r| r.name == name)
    }
}

/// `sum_{i=0}^{min(d, N)} C(N, i)`, exactly.
pub fn zaslavsky(n: i64, d: i64) -> Result<BigUint> {
    if n < 0 || d < 0 {
        return Err(Error::domain("zaslavsky arguments must be non-negative"));
    }
    let n = n as u64;
    let top = (d as u64).min(n);
    let mut total = BigUint::zero();
    let mut binom = BigUint::one();
    for i in 0..=top {
        total += &binom;
        // C(N, i+1) = C(N, i) (N - i) / (i + 1)
        binom = binom * (n - i) / (i + 1);
    }
    Ok(total)
}

fn big_to_f64(b: &BigUint) -> f64 {
    b.to_f64().unwrap_or(f64::INFINITY)
}

/// `L gamma^2 (1 - beta1)^2 / (mu (1 - beta2) lambda_SE)`: the default for
/// the convergence constant, known only up to a constant factor.
pub fn default_c_conv(inputs: &BoundInputs) -> Result<f64> {
    let l = need("L_smooth", inputs.l_smooth, check::pos, "(0, inf)")?;
    let g = need("gamma", inputs.gamma, check::pos, "(0, inf)")?;
    let b1 = need("beta1", inputs.beta1, check::beta, "[0, 1)")?;
    let b2 = need("beta2", inputs.beta2, check::beta, "[0, 1)")?;
    let mu = need("mu", inputs.mu, check::pos, "(0, inf)")?;
    let lam = need("lambda_SE", inputs.lambda_se, check::pos, "(0, inf)")?;
    Ok(l * g * g * (1.0 - b1).powi(2) / (mu * (1.0 - b2) * lam))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T0Cutoff {
    pub t_dist: f64,
    pub t_step: f64,
    pub t0: f64,
    /// `true` when `C_conv` came from the default expression.
    pub asymptotic: bool,
}

fn c_conv(u: &mut Used<'_>) -> Result<(f64, bool)> {
    if u.inputs.c_conv.is_some() {
        Ok((u.get("C_conv", check::pos, "(0, inf)")?, false))
    } else {
        let c = default_c_conv(u.inputs)?;
        u.put("C_conv", c);
        Ok((c, true))
    }
}

fn t0_cutoff_used(u: &mut Used<'_>) -> Result<T0Cutoff> {
    let m = u.get("m", check::pos, "(0, inf)")?;
    let kappa = u.get("kappa", check::pos, "(0, inf)")?;
    let mu = u.get("mu", check::pos, "(0, inf)")?;
    let gamma = u.get("gamma", check::pos, "(0, inf)")?;
    let c_q = u.get("C_q", check::nonneg, "[0, inf)")?;
    let (c, asymptotic) = c_conv(u)?;
    let e = kappa.min(1.0);
    let t_dist = (2.0 * c / mu).powf(1.0 / e) * (2.0 / m).powf(2.0 / e);
    let t_step = (2.0 * gamma * c_q / m).powf(1.0 / (1.0 + kappa));
    Ok(T0Cutoff {
        t_dist,
        t_step,
        t0: t_dist.max(t_step),
        asymptotic,
    })
}

/// Mask-freeze time `T0 = max(T_dist, T_step)`.
pub fn t0_cutoff(inputs: &BoundInputs) -> Result<T0Cutoff> {
    t0_cutoff_used(&mut Used::new(inputs))
}

fn t1_used(u: &mut Used<'_>) -> Result<f64> {
    let b = u.get("B_grad", check::nonneg, "[0, inf)")?;
    let tau = u.get("tau", check::nonneg, "[0, inf)")?;
    let beta2 = u.get("beta2", check::beta, "[0, 1)")?;
    let delta = u.get("delta_floor", check::pos, "(0, inf)")?;
    let lam = u.get("lambda_SE", check::pos, "(0, inf)")?;
    let d_eff = u.get("d_eff", check::pos, "(0, inf)")?;
    let n = u.get("N", check::count, "non-negative integers")?;
    let arg = 2.0 * d_eff * n;
    if arg < 1.0 {
        return Err(Error::domain("2 * d_eff * N must be >= 1 for the spectral-floor time"));
    }
    let one_minus = 1.0 - beta2;
    Ok(2.0 * b * b * (1.0 + 2.0 * tau * one_minus) * arg.ln()
        / (one_minus * one_minus * delta * delta * lam * lam))
}

/// Burn-in time after which every second-moment coordinate stays above
/// `(1 - delta) lambda_SE` with high probability.
pub fn t1_spectral(inputs: &BoundInputs) -> Result<f64> {
    t1_used(&mut Used::new(inputs))
}

fn l6_value(u: &mut Used<'_>) -> Result<f64> {
    let theta = u.get("theta_ang", |v| v > 0.0 && v <= PI, "(0, pi]")?;
    let c = u.get("c_ang", check::pos, "(0, inf)")?;
    let d_eff = u.get("d_eff", |v| v >= 1.0, "[1, inf)")?;
    let reversals = (PI / theta).ceil();
    Ok(reversals * (c + (2.0 * c * (d_eff * d_eff).ln()).sqrt()) * d_eff)
}

/// Rows L0..L6 of the incremental crossing-bound refinement.
pub fn crossing_bounds_table(inputs: &BoundInputs, t0: f64) -> Result<Vec<BoundRow>> {
    if !(t0.is_finite() && t0 >= 0.0) {
        return Err(Error::domain("T0 must be finite and >= 0"));
    }
    let mut rows = Vec::new();

    let mut u = Used::new(inputs);
    let n = u.get("N", check::count, "non-negative integers")?;
    let d = u.get("D", check::count, "non-negative integers")?;
    let v = big_to_f64(&zaslavsky(n as i64, d as i64)?);
    rows.push(BoundRow::new("L0_zaslavsky", v, u, false, "Refinement table L0; Theorem: Zaslavsky baseline"));

    let mut u = Used::new(inputs);
    let n = u.get("N", check::count, "non-negative integers")?;
    u.put("T0", t0);
    rows.push(BoundRow::new("L1_margin_cutoff", n * t0, u, false, "Refinement table L1; Lemma: Positive margin"));

    let mut u = Used::new(inputs);
    let n = u.get("N", check::count, "non-negative integers")?;
    u.put("T0", t0);
    rows.push(BoundRow::new(
        "L2_spectral_floor",
        n * t0,
        u,
        false,
        "Refinement table L2; Lemma: Spectral floor (summable path, count unchanged)",
    ));

    let mut u = Used::new(inputs);
    let n = u.get("N", check::count, "non-negative integers")?;
    let d_eff = u.get("d_eff", check::nonneg, "[0, inf)")?;
    let v = big_to_f64(&zaslavsky(n as i64, d_eff.ceil() as i64)?);
    rows.push(BoundRow::new("L3_low_rank", v, u, false, "Refinement table L3; Lemma: L3 Effective-dimension bound"));

    let mut u = Used::new(inputs);
    let n = u.get("N", check::count, "non-negative integers")?;
    let k = u.get("k", check::count, "non-negative integers")?;
    let k_star = u.get("k_star", check::count, "non-negative integers")?;
    u.put("T0", t0);
    if k_star > n {
        return Err(Error::domain(format!("k_star = {k_star} exceeds N = {n}")));
    }
    rows.push(BoundRow::new(
        "L4_sparse_tope",
        n * t0 + (n - k_star) + 2.0 * k,
        u,
        false,
        "Refinement table L4; Theorem: L5 Bound",
    ));

    let mut u = Used::new(inputs);
    let n = u.get("N", check::pos, "(0, inf)")?;
    let d_eff = u.get("d_eff", check::nonneg, "[0, inf)")?;
    rows.push(BoundRow::new(
        "L5_subgaussian",
        d_eff * n.ln(),
        u,
        true,
        "Refinement table L5; Lemma: Volume-based hyperplane count (up to constant)",
    ));

    let mut u = Used::new(inputs);
    let v = l6_value(&mut u)?;
    rows.push(BoundRow::new("L6_angular", v, u, false, "Refinement table L6; Theorem: Tightest Bound"));
    Ok(rows)
}

/// L4 arithmetic on its own: `N T0 + (N - k*) + 2k`.
pub fn sparse_tope_bound(n: u64, t0: u64, k: u64, k_star: u64) -> Result<u64> {
    if k_star > n {
        return Err(Error::domain(format!("k_star = {k_star} exceeds N = {n}")));
    }
    Ok(n * t0 + (n - k_star) + 2 * k)
}

/// `(D1 + D2 C_cross) / T^min(1, kappa)` with `C_cross` the L6 row.
pub fn gradient_rate(inputs: &BoundInputs, horizon: u64) -> Result<f64> {
    gradient_rate_used(&mut Used::new(inputs), horizon)
}

fn gradient_rate_used(u: &mut Used<'_>, horizon: u64) -> Result<f64> {
    if horizon < 1 {
        return Err(Error::domain("T must be >= 1"));
    }
    let d1 = u.get("D1", check::any, "reals")?;
    let d2 = u.get("D2", check::any, "reals")?;
    let kappa = u.get("kappa", check::pos, "(0, inf)")?;
    let c_cross = if d2 == 0.0 { 0.0 } else { l6_value(u)? };
    Ok((d1 + d2 * c_cross) / (horizon as f64).powf(kappa.min(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoRate {
    pub rho: f64,
    pub contractive: bool,
}

/// `rho = 1 - 2 gamma mu / (T0 ln^(1+kappa) T0)`.
pub fn rho_rate(inputs: &BoundInputs) -> Result<RhoRate> {
    rho_used(&mut Used::new(inputs))
}

fn rho_used(u: &mut Used<'_>) -> Result<RhoRate> {
    let gamma = u.get("gamma", check::nonneg, "[0, inf)")?;
    let mu = u.get("mu", check::nonneg, "[0, inf)")?;
    let kappa = u.get("kappa", check::nonneg, "[0, inf)")?;
    let t0 = u.get("T0", |v| v >= 2.0, "[2, inf)")?;
    let rho = 1.0 - 2.0 * gamma * mu / (t0 * t0.ln().powf(1.0 + kappa));
    Ok(RhoRate {
        rho,
        contractive: rho > 0.0 && rho < 1.0,
    })
}

/// `24 G R B sqrt((d_eff + ln(2/delta)) / n)`.
pub fn gen_gap(inputs: &BoundInputs) -> Result<f64> {
    gen_gap_used(&mut Used::new(inputs))
}

fn gen_gap_used(u: &mut Used<'_>) -> Result<f64> {
    let g = u.get("G_lip", check::nonneg, "[0, inf)")?;
    let r = u.get("R_data", check::nonneg, "[0, inf)")?;
    let b = u.get("B_step", check::nonneg, "[0, inf)")?;
    let d_eff = u.get("d_eff", check::nonneg, "[0, inf)")?;
    let delta = u.get("delta_conf", |v| v > 0.0 && v <= 2.0, "(0, 2]")?;
    let n = u.get("n_samples", |v| v >= 1.0 && v.fract() == 0.0, "positive integers")?;
    Ok(24.0 * g * r * b * ((d_eff + (2.0 / delta).ln()) / n).sqrt())
}

/// `C_d (B / eps)^(d_eff - 1/2)`.
pub fn kakeya_cover_bound(b_step: f64, eps: f64, d_eff: f64, c_d: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < b_step) {
        return Err(Error::domain("kakeya cover bound needs 0 < eps < B_step"));
    }
    if !d_eff.is_finite() || !c_d.is_finite() {
        return Err(Error::domain("d_eff and C_d must be finite"));
    }
    Ok(c_d * (b_step / eps).powf(d_eff - 0.5))
}

/// `gamma G / (sqrt(lambda_SE) T0 ln^(1+kappa) T0)`.
pub fn step_length_bound(inputs: &BoundInputs) -> Result<f64> {
    step_len_used(&mut Used::new(inputs))
}

fn step_len_used(u: &mut Used<'_>) -> Result<f64> {
    let gamma = u.get("gamma", check::nonneg, "[0, inf)")?;
    let g = u.get("G_max", check::nonneg, "[0, inf)")?;
    let lam = u.get("lambda_SE", check::pos, "(0, inf)")?;
    let kappa = u.get("kappa", check::nonneg, "[0, inf)")?;
    let t0 = u.get("T0", |v| v >= 2.0, "[2, inf)")?;
    Ok(gamma * g / (lam.sqrt() * t0 * t0.ln().powf(1.0 + kappa)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlbDeltas {
    pub delta_lip: f64,
    pub delta_holder: f64,
    pub delta_adv: f64,
    /// Exponent `a / (1 + a)` of the polynomial-mixing drift rate `t^(-a/(1+a))`.
    pub delta_polymix_rate: f64,
}

/// Barrier slack along a piecewise-linear path with the given segment lengths.
pub fn ulb_deltas(inputs: &BoundInputs, step_norms: &[f64]) -> Result<UlbDeltas> {
    ulb_used(&mut Used::new(inputs), step_norms)
}

fn ulb_used(u: &mut Used<'_>, step_norms: &[f64]) -> Result<UlbDeltas> {
    if step_norms.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::domain("step norms must be finite and >= 0"));
    }
    let g = u.get("G_lip", check::nonneg, "[0, inf)")?;
    let a = u.get("holder_alpha", |v| v > 0.0 && v <= 1.0, "(0, 1]")?;
    if u.inputs.eps_adv.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::domain("eps_adv entries must be finite and >= 0"));
    }
    let p: f64 = step_norms.iter().sum();
    let p_holder: f64 = step_norms.iter().map(|s| s.powf(a)).sum();
    let adv: f64 = u.inputs.eps_adv.iter().sum();
    u.put("P_path", p);
    Ok(UlbDeltas {
        delta_lip: g * p,
        delta_holder: g * p_holder,
        delta_adv: g * (p + adv),
        delta_polymix_rate: a / (1.0 + a),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierBounds {
    pub lip: f64,
    pub pl: f64,
}

/// Barrier height bounds from gradient-Lipschitzness and from PL.
pub fn barrier_bounds(inputs: &BoundInputs, dist: f64, gap: f64, alpha_min: f64) -> Result<BarrierBounds> {
    if !(dist.is_finite() && dist >= 0.0) {
        return Err(Error::domain("dist must be finite and >= 0"));
    }
    if !(alpha_min > 0.0) {
        return Err(Error::domain("alpha_min must be > 0"));
    }
    let g = need("G_lip", inputs.g_lip, check::nonneg, "[0, inf)")?;
    let mu = need("mu", inputs.mu, check::nonneg, "[0, inf)")?;
    Ok(BarrierBounds {
        lip: 0.5 * g * dist * dist,
        pl: (1.0 - (-mu * dist / alpha_min).exp()) * gap,
    })
}

/// `max(tau, ln(B / (delta (1 - beta))) / (1 - beta))`, with a negative log clamped to 0.
pub fn ema_concentration_time(delta_c: f64, beta: f64, b_grad: f64, tau: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) && beta != 0.0 {
        return Err(Error::domain("beta must lie in [0, 1)"));
    }
    if !(delta_c > 0.0) {
        return Err(Error::domain("delta_c must be > 0"));
    }
    if !(b_grad > 0.0 && tau >= 0.0) {
        return Err(Error::domain("B_grad must be > 0 and tau >= 0"));
    }
    let one_minus = 1.0 - beta;
    let log = (b_grad / (delta_c * one_minus)).ln().max(0.0);
    Ok(tau.max(log / one_minus))
}

/// Options for [`evaluate_all`].
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Horizon for the gradient rate; defaults to `T0` when unset.
    pub horizon: Option<u64>,
    /// Segment lengths for the path-length barrier slack.
    pub step_norms: Vec<f64>,
}

/// Evaluates every formula whose inputs are available; the rest are listed
/// in `skipped` with the reason.
pub fn evaluate_all(inputs: &BoundInputs, opts: &EvalOptions) -> BoundReport {
    let mut report = BoundReport::default();
    fn push_to(report: &mut BoundReport, name: &str, res: Result<BoundRow>) {
        match res {
            Ok(row) => report.bounds.push(row),
            Err(e) => report.skipped.push(format!("{name}: {e}")),
        }
    }
    macro_rules! push {
        ($name:expr, $res:expr) => {{
            let res = $res;
            push_to(&mut report, $name, res)
        }};
    }

    push!("zaslavsky", {
        let mut u = Used::new(inputs);
        (|| {
            let n = u.get("N", check::count, "non-negative integers")?;
            let d = u.get("D", check::count, "non-negative integers")?;
            Ok(big_to_f64(&zaslavsky(n as i64, d as i64)?))
        })()
        .map(|v| BoundRow::new("zaslavsky", v, u, false, "Theorem: Zaslavsky baseline"))
    });

    let t0_res = {
        let mut u = Used::new(inputs);
        t0_cutoff_used(&mut u).map(|c| (c, u.used))
    };
    match t0_res {
        Ok((c, used)) => {
            for (name, v) in [("T_dist", c.t_dist), ("T_step", c.t_step), ("T0_cutoff", c.t0)] {
                report.bounds.push(BoundRow {
                    name: name.to_string(),
                    value: v,
                    inputs: used.clone(),
                    asymptotic: c.asymptotic,
                    paper_ref: "Lemma: Explicit T0 cutoff".to_string(),
                });
            }
        }
        Err(e) => report.skipped.push(format!("T0_cutoff: {e}")),
    }

    push!("T1_spectral", {
        let mut u = Used::new(inputs);
        t1_used(&mut u).map(|v| BoundRow::new("T1_spectral", v, u, false, "Lemma: Spectral floor"))
    });

    match inputs.t0 {
        Some(t0) => match crossing_bounds_table(inputs, t0) {
            Ok(rows) => report.bounds.extend(rows),
            Err(e) => report.skipped.push(format!("crossing table: {e}")),
        },
        None => report.skipped.push("crossing table: T0 is required but not set".into()),
    }

    push!("gradient_rate", {
        let mut u = Used::new(inputs);
        let horizon = opts
            .horizon
            .or_else(|| inputs.t0.map(|t| t.max(1.0).ceil() as u64))
            .unwrap_or(1);
        u.put("T", horizon as f64);
        gradient_rate_used(&mut u, horizon).map(|v| {
            BoundRow::new("gradient_rate", v, u, false, "Theorem: Gradient rate under finite crossings")
        })
    });

    push!("rho", {
        let mut u = Used::new(inputs);
        rho_used(&mut u).map(|r| BoundRow::new("rho", r.rho, u, false, "Theorem: Global Convergence Rate"))
    });

    push!("gen_gap", {
        let mut u = Used::new(inputs);
        gen_gap_used(&mut u).map(|v| BoundRow::new("gen_gap", v, u, false, "Theorem: Generalization via Kakeya"))
    });

    push!("step_length", {
        let mut u = Used::new(inputs);
        step_len_used(&mut u).map(|v| BoundRow::new("step_length", v, u, false, "A bound on the step length"))
    });

    push!("velocity_bound", {
        let mut u = Used::new(inputs);
        (|| {
            let m_sup = u.get("G_max", check::nonneg, "[0, inf)")?;
            let delta = u.get("delta_floor", |v| v < 1.0, "(-inf, 1)")?;
            let lam = u.get("lambda_SE", check::pos, "(0, inf)")?;
            crate::optim::velocity_bound(m_sup, delta, lam)
        })()
        .map(|v| BoundRow::new("velocity_bound", v, u, false, "Corollary: Bounded coordinate velocity"))
    });

    if !opts.step_norms.is_empty() {
        let mut u = Used::new(inputs);
        match ulb_used(&mut u, &opts.step_norms) {
            Ok(d) => {
                let used = u.used;
                for (name, v, r) in [
                    ("ulb_delta_lip", d.delta_lip, "Proposition: ULB via path-length"),
                    ("ulb_delta_holder", d.delta_holder, "Relaxation 1: Hoelder Smoothness"),
                    ("ulb_delta_adv", d.delta_adv, "Relaxation 2: Adversarial Perturbations"),
                    ("polymix_rate_exponent", d.delta_polymix_rate, "Proposition: Polynomial-Mixing Drift"),
                ] {
                    report.bounds.push(BoundRow {
                        name: name.to_string(),
                        value: v,
                        inputs: used.clone(),
                        asymptotic: name == "polymix_rate_exponent",
                        paper_ref: r.to_string(),
                    });
                }
            }
            Err(e) => report.skipped.push(format!("ulb: {e}")),
        }
    }
    report
}
