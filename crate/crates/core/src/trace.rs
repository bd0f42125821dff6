//! Per-step instrumentation of a training run and the empirical constants
//! extracted from it.
//!
//! Step `t` of a run moves `theta_t` to `theta_{t+1}` with `Delta_t`. Its
//! record holds the loss, gradient, margin and parameter sensitivity at
//! `theta_t`, and the activation patterns at `theta_{t+1}`; `sign_flips`
//! counts bits that changed between `theta_t` and `theta_{t+1}`.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt;
use crate::linalg;
use crate::relunet::{self, ActivationPattern, Params};

/// Default number of gradients in the effective-dimension window.
pub const DEFF_WINDOW: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub alpha: f64,
    pub loss: f64,
    pub grad_norm2: f64,
    pub delta_norm2: f64,
    pub delta_norm1: f64,
    pub cos_prev: f64,
    pub min_vhat: f64,
    pub margin: f64,
    pub pattern_hashes: Vec<u64>,
    pub sign_flips: u64,
    /// Max active-neuron count over probes at `theta_{t+1}`.
    pub k_max: u64,
    /// Hex bitmask (neuron 0 in the lowest bit) of neurons active on any probe at `theta_{t+1}`.
    pub active_mask: String,
    /// [`relunet::param_sensitivity`] at `theta_t`.
    pub lip_theta: f64,
    /// `<grad L(theta_t), Delta_t>`.
    pub grad_dot_delta: f64,
    /// Latest windowed effective dimension, refreshed every window.
    pub d_eff: Option<f64>,
    /// Noise scale of per-example gradients at refresh steps.
    pub sigma_hat: Option<f64>,
    /// Fraction of per-example noise samples beyond `3 sigma_hat` at refresh steps.
    pub tail_frac: Option<f64>,
}

/// Bitmask helpers for [`StepRecord::active_mask`].
pub fn encode_mask(bits: &[bool]) -> String {
    let mut nibbles: Vec<u8> = bits
        .chunks(4)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i)))
        .collect();
    if nibbles.is_empty() {
        nibbles.push(0);
    }
    nibbles
        .iter()
        .rev()
        .map(|n| char::from_digit(*n as u32, 16).expect("nibble < 16"))
        .collect()
}

pub fn decode_mask(hex: &str, n: usize) -> Result<Vec<bool>> {
    let mut bits = vec![false; n];
    for (pos, ch) in hex.chars().rev().enumerate() {
        let nib = ch
            .to_digit(16)
            .ok_or_else(|| Error::Parse(format!("bad hex digit in active_mask: {ch:?}")))?;
        for i in 0..4 {
            if nib & (1 << i) != 0 {
                let idx = pos * 4 + i;
                if idx >= n {
                    return Err(Error::Parse("active_mask longer than neuron count".into()));
                }
                bits[idx] = true;
            }
        }
    }
    Ok(bits)
}

/// Optional extra measurements attached to a record at window refreshes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Extras {
    pub d_eff: Option<f64>,
    pub sigma_hat: Option<f64>,
    pub tail_frac: Option<f64>,
}

/// Stateful recorder for one run over a fixed probe set.
#[derive(Debug, Clone)]
pub struct Tracer {
    probes: Vec<Vec<f64>>,
    prev_patterns: Vec<ActivationPattern>,
    prev_delta: Option<Params>,
    next_t: u64,
}

/// Inputs describing one optimizer step.
pub struct StepInput<'a> {
    pub alpha: f64,
    pub loss: f64,
    pub params_before: &'a Params,
    pub params_after: &'a Params,
    pub grad: &'a Params,
    pub min_vhat: f64,
}

impl Tracer {
    pub fn new(probes: Vec<Vec<f64>>, params0: &Params) -> Result<Self> {
        if probes.is_empty() {
            return Err(Error::Empty("probe set is empty".into()));
        }
        let prev_patterns = patterns(params0, &probes)?;
        Ok(Tracer {
            probes,
            prev_patterns,
            prev_delta: None,
            next_t: 0,
        })
    }

    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    pub fn record(&mut self, step: StepInput<'_>, extras: Extras) -> Result<StepRecord> {
        let delta = step.params_after.sub(step.params_before)?;
        step.grad.check_compatible(&delta)?;
        let after = patterns(step.params_after, &self.probes)?;
        let sign_flips: u64 = after
            .iter()
            .zip(&self.prev_patterns)
            .map(|(a, b)| a.hamming(b) as u64)
            .sum();
        let cos_prev = match &self.prev_delta {
            Some(prev) => cosine(prev.as_slice(), delta.as_slice()),
            None => 0.0,
        };
        let n = after[0].len();
        let mut union = vec![false; n];
        for p in &after {
            for (u, &b) in union.iter_mut().zip(&p.bits) {
                *u |= b;
            }
        }
        let rec = StepRecord {
            t: self.next_t,
            alpha: step.alpha,
            loss: step.loss,
            grad_norm2: step.grad.norm2(),
            delta_norm2: delta.norm2(),
            delta_norm1: delta.norm1(),
            cos_prev,
            min_vhat: step.min_vhat,
            margin: relunet::margin_of_inputs(step.params_before, &self.probes)?,
            pattern_hashes: after.iter().map(|p| p.fnv1a()).collect(),
            sign_flips,
            k_max: after.iter().map(|p| p.k() as u64).max().unwrap_or(0),
            active_mask: encode_mask(&union),
            lip_theta: relunet::param_sensitivity(step.params_before, &self.probes)?,
            grad_dot_delta: step.grad.dot(&delta),
            d_eff: extras.d_eff,
            sigma_hat: extras.sigma_hat,
            tail_frac: extras.tail_frac,
        };
        self.prev_patterns = after;
        self.prev_delta = Some(delta);
        self.next_t += 1;
        Ok(rec)
    }
}

fn patterns(params: &Params, probes: &[Vec<f64>]) -> Result<Vec<ActivationPattern>> {
    probes
        .iter()
        .map(|x| relunet::activation_pattern(params, x))
        .collect()
}

/// Cosine of the angle between `a` and `b`; 0 when either is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = linalg::norm2(a);
    let nb = linalg::norm2(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (linalg::dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingStats {
    pub crossings: u64,
    pub distinct_patterns: u64,
    pub t0_emp: u64,
}

pub fn crossings_count(records: &[StepRecord]) -> Result<CrossingStats> {
    if records.is_empty() {
        return Err(Error::Empty("trace has no records".into()));
    }
    let mut crossings = 0;
    let mut seen: HashSet<&[u64]> = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        let changed = if i == 0 {
            r.sign_flips > 0
        } else {
            r.pattern_hashes != records[i - 1].pattern_hashes
        };
        crossings += changed as u64;
        seen.insert(&r.pattern_hashes);
    }
    let t0_emp = records
        .iter()
        .enumerate()
        .rev()
        .find(|(_, r)| r.sign_flips > 0)
        .map_or(0, |(i, _)| i as u64 + 1);
    Ok(CrossingStats {
        crossings,
        distinct_patterns: seen.len() as u64,
        t0_emp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDimension {
    pub value: f64,
    pub degenerate: bool,
}

/// Participation ratio `(sum lambda)^2 / sum lambda^2` of the last `window`
/// gradients' second-moment spectrum, computed on the window Gram matrix.
pub fn effective_dimension(grads: &[&[f64]], window: usize) -> Result<EffectiveDimension> {
    if window < 2 {
        return Err(Error::domain("effective-dimension window must be >= 2"));
    }
    if grads.len() < window {
        return Err(Error::InsufficientData(format!(
            "{} gradients available, window needs {window}",
            grads.len()
        )));
    }
    let recent = &grads[grads.len() - window..];
    let eig = linalg::sym_eigen_desc(linalg::gram(recent));
    let lmax = eig.first().map_or(0.0, |p| p.0);
    if !(lmax > 0.0) {
        return Ok(EffectiveDimension {
            value: 0.0,
            degenerate: true,
        });
    }
    let kept = eig.iter().map(|p| p.0).filter(|&l| l >= 1e-12 * lmax);
    let (s1, s2) = kept.fold((0.0, 0.0), |(a, b), l| (a + l, b + l * l));
    Ok(EffectiveDimension {
        value: s1 * s1 / s2,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubGaussianEstimate {
    pub sigma: f64,
    /// Fraction of samples with `|<noise, u>| > 3 sigma` along the top eigendirection.
    pub tail_fraction: f64,
    pub tail_ok: bool,
}

pub const MIN_NOISE_SAMPLES: usize = 30;
pub const TAIL_LIMIT: f64 = 0.01;

/// `sigma = sqrt(top eigenvalue of the empirical noise covariance)`.
pub fn subgaussian_sigma(noise: &[&[f64]]) -> Result<SubGaussianEstimate> {
    if noise.len() < MIN_NOISE_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} noise samples, need at least {MIN_NOISE_SAMPLES}",
            noise.len()
        )));
    }
    let n = noise.len();
    let dim = noise[0].len();
    if noise.iter().any(|v| v.len() != dim) {
        return Err(Error::shape("noise samples have different lengths"));
    }
    let mut mean = vec![0.0; dim];
    for v in noise {
        mean.iter_mut().zip(v.iter()).for_each(|(m, x)| *m += x / n as f64);
    }
    let centered: Vec<Vec<f64>> = noise
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let refs: Vec<&[f64]> = centered.iter().map(|v| v.as_slice()).collect();
    let dirs = linalg::principal_directions(&refs, 1, 0.0);
    let Some(u) = dirs.first() else {
        return Ok(SubGaussianEstimate {
            sigma: 0.0,
            tail_fraction: 0.0,
            tail_ok: true,
        });
    };
    let proj: Vec<f64> = refs.iter().map(|v| linalg::dot(v, u)).collect();
    let var = proj.iter().map(|p| p * p).sum::<f64>() / n as f64;
    let sigma = var.sqrt();
    let tail = proj.iter().filter(|p| p.abs() > 3.0 * sigma).count() as f64 / n as f64;
    Ok(SubGaussianEstimate {
        sigma,
        tail_fraction: tail,
        tail_ok: tail <= TAIL_LIMIT,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularAudit {
    pub fraction_violating: f64,
    pub theta_q99: f64,
    pub steps: u64,
}

/// Angular concentration over steps `t >= t_from` that have a predecessor.
pub fn angular_audit(records: &[StepRecord], epsilon: f64, t_from: u64) -> AngularAudit {
    let cos: Vec<f64> = records
        .iter()
        .filter(|r| r.t >= t_from && r.t > 0)
        .map(|r| r.cos_prev)
        .collect();
    if cos.is_empty() {
        return AngularAudit {
            fraction_violating: 0.0,
            theta_q99: 0.0,
            steps: 0,
        };
    }
    let bad = cos.iter().filter(|&&c| c < 1.0 - epsilon).count();
    let mut angles: Vec<f64> = cos.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    AngularAudit {
        fraction_violating: bad as f64 / cos.len() as f64,
        theta_q99: quantile_nearest_rank(&angles, 0.99),
        steps: cos.len() as u64,
    }
}

/// Nearest-rank quantile of sorted data.
pub(crate) fn quantile_nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: u64,
    #[serde(rename = "T0_emp")]
    pub t0_emp: u64,
    pub crossings: u64,
    pub distinct_patterns: u64,
    pub k_max: u64,
    pub k_star: u64,
    pub d_eff_emp: f64,
    pub path_len_l2: f64,
    pub path_len_l1: f64,
    pub sigma_hat: f64,
    pub theta_ang_q99: f64,
    #[serde(rename = "G_max_emp")]
    pub g_max_emp: f64,
    #[serde(rename = "B_step")]
    pub b_step: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_margin: f64,
    pub min_vhat_final: f64,
    pub tail_frac: Option<f64>,
}

/// Run-level constants. `grads`, when at least two are given, recompute the
/// effective dimension over the last `min(64, len)` of them; otherwise the
/// latest `d_eff` carried by the records is used.
pub fn summarize(records: &[StepRecord], grads: &[&[f64]], n_neurons: usize) -> Result<TraceSummary> {
    let stats = crossings_count(records)?;
    let mut union = vec![false; n_neurons];
    for r in records {
        for (u, b) in union.iter_mut().zip(decode_mask(&r.active_mask, n_neurons)?) {
            *u |= b;
        }
    }
    let d_eff_emp = if grads.len() >= 2 {
        effective_dimension(grads, grads.len().min(DEFF_WINDOW))?.value
    } else {
        records.iter().rev().find_map(|r| r.d_eff).unwrap_or(0.0)
    };
    let tails: Vec<f64> = records.iter().filter_map(|r| r.tail_frac).collect();
    let last = records.last().expect("non-empty");
    Ok(TraceSummary {
        steps: records.len() as u64,
        t0_emp: stats.t0_emp,
        crossings: stats.crossings,
        distinct_patterns: stats.distinct_patterns,
        k_max: records.iter().map(|r| r.k_max).max().unwrap_or(0),
        k_star: union.iter().filter(|&&b| b).count() as u64,
        d_eff_emp,
        path_len_l2: records.iter().map(|r| r.delta_norm2).sum(),
        path_len_l1: records.iter().map(|r| r.delta_norm1).sum(),
        sigma_hat: records
            .iter()
            .filter_map(|r| r.sigma_hat)
            .fold(0.0, f64::max),
        theta_ang_q99: angular_audit(records, 0.01, stats.t0_emp).theta_q99,
        g_max_emp: records.iter().map(|r| r.grad_norm2).fold(0.0, f64::max),
        b_step: records
            .iter()
            .filter(|r| r.t >= stats.t0_emp)
            .map(|r| r.delta_norm2)
            .fold(0.0, f64::max),
        initial_loss: records[0].loss,
        final_loss: last.loss,
        final_margin: last.margin,
        min_vhat_final: last.min_vhat,
        tail_frac: if tails.is_empty() {
            None
        } else {
            Some(tails.iter().sum::<f64>() / tails.len() as f64)
        },
    })
}

/// Steps whose displacement lies inside the stability radius
/// `margin_t / (2 * lip_theta_t)` but which still flipped a mask bit.
pub fn stability_violations(records: &[StepRecord]) -> Vec<u64> {
    records
        .iter()
        .filter(|r| in_stability_radius(r) && r.sign_flips > 0)
        .map(|r| r.t)
        .collect()
}

pub fn in_stability_radius(r: &StepRecord) -> bool {
    if r.lip_theta == 0.0 {
        return r.margin > 0.0;
    }
    r.delta_norm2 < r.margin / (2.0 * r.lip_theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineAudit {
    /// `sum |L(theta_{t+1}) - L(theta_t) - <grad, Delta_t>|` over mask-preserving steps.
    pub total_error: f64,
    pub total_sq_step: f64,
    /// Smallest `L_H'` with `error_t <= L_H' |Delta_t|^2` on every counted step.
    pub fitted_constant: f64,
    pub steps: u64,
    pub holds: bool,
}

pub fn affine_error_audit(records: &[StepRecord]) -> AffineAudit {
    let mut total_error = 0.0;
    let mut total_sq = 0.0;
    let mut fitted: f64 = 0.0;
    let mut steps = 0;
    for w in records.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        if cur.sign_flips > 0 || cur.delta_norm2 == 0.0 {
            continue;
        }
        let err = (next.loss - cur.loss - cur.grad_dot_delta).abs();
        let sq = cur.delta_norm2 * cur.delta_norm2;
        total_error += err;
        total_sq += sq;
        fitted = fitted.max(err / sq);
        steps += 1;
    }
    AffineAudit {
        total_error,
        total_sq_step: total_sq,
        fitted_constant: fitted,
        steps,
        holds: total_error <= fitted * total_sq * (1.0 + 1e-12) + 1e-300,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovAudit {
    /// Fitted on the first half of the post-`t_from` steps.
    pub kappa_hat: f64,
    /// Increases of `V_t` on the held-out second half.
    pub violations: u64,
    pub checked: u64,
}

/// `V_t = loss_t + kappa * sum_{s >= t} |Delta_s|^2` is non-increasing iff
/// `loss_{t+1} - loss_t <= kappa |Delta_t|^2`.
pub fn lyapunov_audit(records: &[StepRecord], t_from: u64) -> LyapunovAudit {
    let pairs: Vec<(f64, f64)> = records
        .windows(2)
        .filter(|w| w[0].t >= t_from)
        .map(|w| (w[1].loss - w[0].loss, w[0].delta_norm2 * w[0].delta_norm2))
        .collect();
    let half = pairs.len() / 2;
    let kappa_hat = pairs[..half]
        .iter()
        .filter(|(_, sq)| *sq > 0.0)
        .map(|(inc, sq)| inc / sq)
        .fold(0.0, f64::max);
    let held = &pairs[half..];
    let violations = held
        .iter()
        .filter(|(inc, sq)| *inc > kappa_hat * sq + 1e-15 * (1.0 + inc.abs()))
        .count() as u64;
    LyapunovAudit {
        kappa_hat,
        violations,
        checked: held.len() as u64,
    }
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[StepRecord]) -> Result<()> {
    for r in records {
        writeln!(w, "{}", fmt::to_json_line(r)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<StepRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StepRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("trace line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(t: u64, hashes: Vec<u64>, flips: u64) -> StepRecord {
        StepRecord {
            t,
            alpha: 0.1,
            loss: 1.0,
            grad_norm2: 1.0,
            delta_norm2: 0.1,
            delta_norm1: 0.2,
            cos_prev: 1.0,
            min_vhat: 0.5,
            margin: 0.1,
            pattern_hashes: hashes,
            sign_flips: flips,
            k_max: 1,
            active_mask: "1".into(),
            lip_theta: 1.0,
            grad_dot_delta: -0.01,
            d_eff: None,
            sigma_hat: None,
            tail_frac: None,
        }
    }

    #[test]
    fn mask_roundtrip() {
        let bits = vec![true, false, false, true, true, false, true];
        let hex = encode_mask(&bits);
        assert_eq!(hex, "59");
        assert_eq!(decode_mask(&hex, 7).unwrap(), bits);
        assert_eq!(encode_mask(&[]), "0");
    }

    #[test]
    fn constant_pattern_has_no_crossings() {
        let rs: Vec<_> = (0..5).map(|t| rec(t, vec![7, 8], 0)).collect();
        let s = crossings_count(&rs).unwrap();
        assert_eq!(
            s,
            CrossingStats {
                crossings: 0,
                distinct_patterns: 1,
                t0_emp: 0
            }
        );
    }

    #[test]
    fn aba_counts_two_crossings_two_patterns() {
        let rs = vec![rec(0, vec![1], 0), rec(1, vec![2], 1), rec(2, vec![1], 1)];
        let s = crossings_count(&rs).unwrap();
        assert_eq!(s.crossings, 2);
        assert_eq!(s.distinct_patterns, 2);
        assert_eq!(s.t0_emp, 3);
    }

    #[test]
    fn single_flip_at_step_five() {
        let rs: Vec<_> = (0..10)
            .map(|t| rec(t, vec![if t >= 5 { 2 } else { 1 }], (t == 5) as u64))
            .collect();
        assert_eq!(crossings_count(&rs).unwrap().t0_emp, 6);
        assert!(crossings_count(&[]).is_err());
    }

    #[test]
    fn effective_dimension_examples() {
        let g = vec![1.0, 2.0, -1.0];
        let same: Vec<&[f64]> = vec![&g; 5];
        assert!((effective_dimension(&same, 5).unwrap().value - 1.0).abs() < 1e-9);

        let basis: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..6).map(|j| if i == j { 2.0 } else { 0.0 }).collect())
            .collect();
        let refs: Vec<&[f64]> = basis.iter().map(|v| v.as_slice()).collect();
        assert!((effective_dimension(&refs, 4).unwrap().value - 4.0).abs() < 1e-9);

        // Spectrum (2, 1, 1): orthogonal gradients with squared norms 2, 1, 1.
        let a = [2f64.sqrt(), 0.0, 0.0];
        let b = [0.0, 1.0, 0.0];
        let c = [0.0, 0.0, 1.0];
        let v: Vec<&[f64]> = vec![&a, &b, &c];
        assert!((effective_dimension(&v, 3).unwrap().value - 16.0 / 6.0).abs() < 1e-12);

        let z = [0.0; 3];
        let zs: Vec<&[f64]> = vec![&z; 3];
        let d = effective_dimension(&zs, 3).unwrap();
        assert!(d.degenerate && d.value == 0.0);
        assert!(effective_dimension(&zs, 4).is_err());
    }

    #[test]
    fn zero_noise_gives_zero_sigma() {
        let s = vec![vec![1.0, 2.0]; 40];
        let refs: Vec<&[f64]> = s.iter().map(|v| v.as_slice()).collect();
        let est = subgaussian_sigma(&refs).unwrap();
        assert!(est.sigma < 1e-12);
        assert!(est.tail_ok);
        assert!(subgaussian_sigma(&refs[..10]).is_err());
    }

    #[test]
    fn angular_examples() {
        let rs: Vec<_> = (0..10).map(|t| rec(t, vec![1], 0)).collect();
        let a = angular_audit(&rs, 0.01, 0);
        assert_eq!(a.fraction_violating, 0.0);
        assert_eq!(a.theta_q99, 0.0);
        let alt: Vec<_> = (0..10)
            .map(|t| StepRecord {
                cos_prev: -1.0,
                ..rec(t, vec![1], 0)
            })
            .collect();
        assert_eq!(angular_audit(&alt, 1.9, 0).fraction_violating, 1.0);
    }

    #[test]
    fn summary_path_length() {
        let mut a = rec(0, vec![1], 0);
        a.delta_norm2 = 0.3;
        let mut b = rec(1, vec![1], 0);
        b.delta_norm2 = 0.4;
        let s = summarize(&[a, b], &[], 1).unwrap();
        assert!((s.path_len_l2 - 0.7).abs() < 1e-15);
        assert_eq!(s.crossings, 0);
        assert_eq!(s.t0_emp, 0);
        assert_eq!(s.k_star, 1);
        assert!(summarize(&[], &[], 1).is_err());
    }

    #[test]
    fn jsonl_roundtrip_is_exact() {
        let mut r = rec(3, vec![u64::MAX, 12345], 2);
        r.loss = 1.0 / 3.0;
        r.d_eff = Some(2.5);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&r)).unwrap();
        let back = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![r]);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("{\"t\":3,\"alpha\":"));
    }
}
