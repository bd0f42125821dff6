//! Adam / AdamW with bias correction and the two step-size schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relunet::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `gamma / (t * max(ln t, ln 2)^(1 + kappa))`; summable.
    LogPower { gamma: f64, kappa: f64 },
    /// `c * t^(-eta)`; not summable for `eta <= 1`.
    Power { c: f64, eta: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::LogPower { gamma, kappa } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::Config("schedule gamma must be > 0".into()));
                }
                if !(kappa > 0.0 && kappa.is_finite()) {
                    return Err(Error::Config("schedule kappa must be > 0".into()));
                }
            }
            Schedule::Power { c, eta } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Config("schedule c must be > 0".into()));
                }
                if !(eta > 0.5 && eta < 1.0) {
                    return Err(Error::Config("schedule eta must lie in (0.5, 1)".into()));
                }
            }
        }
        Ok(())
    }

    /// Whether `sum alpha_t` converges under this schedule.
    pub fn is_summable(&self) -> bool {
        matches!(self, Schedule::LogPower { .. })
    }

    pub fn alpha(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::domain("step-size schedule is defined for t >= 1"));
        }
        let tf = t as f64;
        Ok(match *self {
            Schedule::LogPower { gamma, kappa } => {
                let log = tf.ln().max(std::f64::consts::LN_2);
                gamma / (tf * log.powf(1.0 + kappa))
            }
            Schedule::Power { c, eta } => c * tf.powf(-eta),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule: Schedule,
    pub weight_decay: f64,
    /// `true` for AdamW (decay applied to the parameters after the adaptive
    /// step), `false` for L2 decay folded into the gradient.
    pub decoupled: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            schedule: Schedule::LogPower {
                gamma: 0.05,
                kappa: 0.5,
            },
            weight_decay: 0.0,
            decoupled: true,
        }
    }
}

/// Conditions the convergence theorems assume but that the optimizer does
/// not require; reported alongside a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimFlags {
    pub beta_sum_below_one: bool,
    pub beta1_below_sqrt_beta2: bool,
    pub summable_schedule: bool,
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::Config("optim.beta1 must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("optim.beta2 must lie in [0, 1)".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config("optim.epsilon must be >= 0".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("optim.weight_decay must be >= 0".into()));
        }
        self.schedule.validate()
    }

    pub fn flags(&self) -> OptimFlags {
        OptimFlags {
            beta_sum_below_one: self.beta1 + self.beta2 < 1.0,
            beta1_below_sqrt_beta2: self.beta1 < self.beta2.sqrt(),
            summable_schedule: self.schedule.is_summable(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimState {
    pub fn new(len: usize) -> Self {
        OptimState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Smallest bias-corrected second moment `min_j v_hat_j` (0 before the first step).
    pub fn min_vhat(&self, beta2: f64) -> f64 {
        if self.t == 0 {
            return 0.0;
        }
        let corr = 1.0 - beta2.powi(self.t as i32);
        self.v.iter().fold(f64::INFINITY, |m, &v| m.min(v / corr))
    }

    pub fn max_abs_m(&self) -> f64 {
        self.m.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamStep {
    pub params: Params,
    /// `theta_{t+1} - theta_t`, including any decoupled decay.
    pub delta: Params,
    pub state: OptimState,
    pub alpha: f64,
}

/// One Adam (or AdamW) update from step `state.t` to `state.t + 1`.
pub fn adam_step(
    params: &Params,
    grad: &Params,
    state: &OptimState,
    config: &OptimConfig,
) -> Result<AdamStep> {
    params.check_compatible(grad)?;
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::shape("optimizer state does not match parameter count"));
    }
    if !grad.is_finite() {
        return Err(Error::numeric("non-finite gradient").at_step(state.t + 1));
    }
    let t = state.t + 1;
    let alpha = config.schedule.alpha(t)?;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    let lambda = config.weight_decay;

    let theta = params.as_slice();
    let mut m = state.m.clone();
    let mut v = state.v.clone();
    let mut delta = vec![0.0; theta.len()];
    for j in 0..theta.len() {
        let mut g = grad.as_slice()[j];
        if !config.decoupled {
            g += lambda * theta[j];
        }
        m[j] = b1 * m[j] + (1.0 - b1) * g;
        v[j] = b2 * v[j] + (1.0 - b2) * g * g;
        let m_hat = m[j] / c1;
        let v_hat = v[j] / c2;
        let denom = v_hat.sqrt() + config.epsilon;
        let mut step = if m_hat == 0.0 { 0.0 } else { -alpha * m_hat / denom };
        if config.decoupled {
            // (theta + step)(1 - alpha lambda) - theta
            step = step * (1.0 - alpha * lambda) - alpha * lambda * theta[j];
        }
        delta[j] = step;
    }
    let new_params: Vec<f64> = theta.iter().zip(&delta).map(|(a, d)| a + d).collect();
    if new_params.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite parameters after update").at_step(t));
    }
    let dims = params.dims();
    Ok(AdamStep {
        params: Params::from_flat(dims, new_params)?,
        delta: Params::from_flat(dims, delta)?,
        state: OptimState { m, v, t },
        alpha,
    })
}

/// `C_q = M / sqrt((1 - delta) lambda_SE)`: the coordinate velocity bound.
pub fn velocity_bound(m_sup: f64, delta: f64, lambda_se: f64) -> Result<f64> {
    if !(lambda_se > 0.0) {
        return Err(Error::domain("lambda_SE must be > 0"));
    }
    if !(delta < 1.0) {
        return Err(Error::domain("delta must be < 1"));
    }
    Ok(m_sup / ((1.0 - delta) * lambda_se).sqrt())
}

/// `sum_{t=1}^{horizon} alpha_t^2`.
pub fn alpha_sq_partial_sum(schedule: &Schedule, horizon: u64) -> Result<f64> {
    let mut s = 0.0;
    for t in 1..=horizon {
        s += schedule.alpha(t)?.powi(2);
    }
    Ok(s)
}
