//! Dense feed-forward ReLU network with hand-written forward and backward
//! passes, activation-pattern extraction and margin measurement.
//!
//! Conventions:
//! - a pre-activation `z = 0` counts as inactive (bit 0, subgradient 0);
//! - the output layer is affine (no ReLU), every other layer is followed by
//!   a ReLU;
//! - all arithmetic is `f64`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SpectralNorm};

/// Architecture and initialization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// `d_0, d_1, ..., d_n`: input width, hidden widths, output width.
    pub layer_dims: Vec<usize>,
    pub init_scale: f64,
    pub seed: u64,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::Config(
                "net.layer_dims needs at least an input and an output width".into(),
            ));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("net.layer_dims entries must be >= 1".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(Error::Config("net.init_scale must be a positive finite number".into()));
        }
        Ok(())
    }
}

/// Weights and biases of every layer, stored contiguously.
///
/// Layer `l` occupies `W_l` (row-major, `d_{l+1} x d_l`) followed by `b_l`
/// (`d_{l+1}`). The flat view doubles as the optimizer's parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Params {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("invalid layer dims {dims:?}")));
        }
        let len = dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Params {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Uniform initialization: weights in `±init_scale/sqrt(d_in)`, biases in
    /// `±init_scale`, drawn layer by layer from ChaCha8 seeded with `cfg.seed`.
    pub fn init(cfg: &NetConfig) -> Result<Self> {
        cfg.validate()?;
        let mut p = Params::zeros(&cfg.layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for l in 0..p.num_layers() {
            let bound = cfg.init_scale / (p.dims[l] as f64).sqrt();
            for w in p.weights_mut(l) {
                *w = rng.gen_range(-bound..=bound);
            }
            for b in p.biases_mut(l) {
                *b = rng.gen_range(-cfg.init_scale..=cfg.init_scale);
            }
        }
        Ok(p)
    }

    /// Builds parameters from explicit per-layer matrices (row-major) and biases.
    pub fn from_layers(dims: &[usize], weights: &[Vec<f64>], biases: &[Vec<f64>]) -> Result<Self> {
        let mut p = Params::zeros(dims)?;
        if weights.len() != p.num_layers() || biases.len() != p.num_layers() {
            return Err(Error::shape("layer count does not match dims"));
        }
        for l in 0..p.num_layers() {
            if weights[l].len() != p.dims[l + 1] * p.dims[l] || biases[l].len() != p.dims[l + 1] {
                return Err(Error::shape(format!("layer {l} has the wrong shape")));
            }
            p.weights_mut(l).copy_from_slice(&weights[l]);
            p.biases_mut(l).copy_from_slice(&biases[l]);
        }
        Ok(p)
    }

    pub fn from_flat(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let mut p = Params::zeros(dims)?;
        if data.len() != p.data.len() {
            return Err(Error::shape(format!(
                "flat vector has {} entries, expected {}",
                data.len(),
                p.data.len()
            )));
        }
        p.data = data;
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            dims: self.dims.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Implemented parameter count `sum d_l (d_{l-1} + 1)`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Parameter count under the homogeneous lift, `sum (d_l + 1)(d_{l-1} + 1)`.
    pub fn lifted_len(&self) -> usize {
        self.dims.windows(2).map(|w| (w[1] + 1) * (w[0] + 1)).sum()
    }

    /// Number of hidden ReLU neurons `N`.
    pub fn hidden_neurons(&self) -> usize {
        self.dims[1..self.dims.len() - 1].iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    fn offset(&self, l: usize) -> usize {
        self.dims[..=l]
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let o = self.offset(l);
        &self.data[o..o + self.dims[l + 1] * self.dims[l]]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let o = self.offset(l);
        let n = self.dims[l + 1] * self.dims[l];
        &mut self.data[o..o + n]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let o = self.offset(l) + self.dims[l + 1] * self.dims[l];
        &self.data[o..o + self.dims[l + 1]]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        let o = self.offset(l) + self.dims[l + 1] * self.dims[l];
        let n = self.dims[l + 1];
        &mut self.data[o..o + n]
    }

    pub fn check_compatible(&self, other: &Params) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(format!(
                "parameter shapes differ: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn norm2(&self) -> f64 {
        linalg::norm2(&self.data)
    }

    pub fn norm1(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn dot(&self, other: &Params) -> f64 {
        linalg::dot(&self.data, &other.data)
    }

    /// `self - other`.
    pub fn sub(&self, other: &Params) -> Result<Params> {
        self.check_compatible(other)?;
        Ok(Params {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// `(1 - alpha) * a + alpha * b`.
    pub fn lerp(a: &Params, b: &Params, alpha: f64) -> Result<Params> {
        a.check_compatible(b)?;
        Ok(Params {
            dims: a.dims.clone(),
            data: a
                .data
                .iter()
                .zip(&b.data)
                .map(|(x, y)| (1.0 - alpha) * x + alpha * y)
                .collect(),
        })
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    CrossEntropyWithLogits,
}

/// Supervised examples plus the per-example loss they are scored with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub loss_kind: LossKind,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, loss_kind: LossKind) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Empty("dataset has no examples".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::shape(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let din = inputs[0].len();
        let dout = targets[0].len();
        if inputs.iter().any(|x| x.len() != din) || targets.iter().any(|y| y.len() != dout) {
            return Err(Error::shape("ragged inputs or targets"));
        }
        if targets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("targets must be finite"));
        }
        Ok(Dataset {
            inputs,
            targets,
            loss_kind,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.len())
    }

    pub fn output_dim(&self) -> usize {
        self.targets.first().map_or(0, |y| y.len())
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i].clone()).collect(),
            loss_kind: self.loss_kind,
        }
    }
}

/// Binary on/off state of every hidden neuron for one input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    pub bits: Vec<bool>,
}

impl ActivationPattern {
    /// Number of active neurons.
    pub fn k(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn hamming(&self, other: &ActivationPattern) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    /// 64-bit FNV-1a over the bits, one byte (0 or 1) per neuron.
    pub fn fnv1a(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        self.bits.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
    }
}

/// Output of [`forward`]: the network output and every layer's pre-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub output: Vec<f64>,
    /// `preacts[l]` is `z_{l+1}`; the last entry equals `output`.
    pub preacts: Vec<Vec<f64>>,
}

fn check_input(params: &Params, x: &[f64]) -> Result<()> {
    if x.len() != params.dims[0] {
        return Err(Error::shape(format!(
            "input has length {}, network expects {}",
            x.len(),
            params.dims[0]
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("input contains a non-finite value"));
    }
    Ok(())
}

fn affine(params: &Params, l: usize, h: &[f64]) -> Vec<f64> {
    let w = params.weights(l);
    let b = params.biases(l);
    let cols = params.dims[l];
    b.iter()
        .enumerate()
        .map(|(i, bi)| bi + linalg::dot(&w[i * cols..(i + 1) * cols], h))
        .collect()
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

pub fn forward(params: &Params, x: &[f64]) -> Result<Forward> {
    check_input(params, x)?;
    let n = params.num_layers();
    let mut preacts = Vec::with_capacity(n);
    let mut h = x.to_vec();
    for l in 0..n {
        let z = affine(params, l, &h);
        if l + 1 < n {
            h = relu(&z);
        }
        preacts.push(z);
    }
    let output = preacts[n - 1].clone();
    Ok(Forward { output, preacts })
}

/// Loss of one prediction and its derivative with respect to the prediction.
///
/// Squared error is `0.5 * |f - y|^2`. Cross-entropy treats `y` as (possibly
/// unnormalized) class weights: `sum(y) * logsumexp(f) - <y, f>`.
fn pointwise_loss(kind: LossKind, f: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    match kind {
        LossKind::SquaredError => {
            let r: Vec<f64> = f.iter().zip(y).map(|(a, b)| a - b).collect();
            (0.5 * linalg::dot(&r, &r), r)
        }
        LossKind::CrossEntropyWithLogits => {
            let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = f.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum_exp.ln();
            let ysum: f64 = y.iter().sum();
            let loss = ysum * lse - linalg::dot(y, f);
            let grad = f
                .iter()
                .zip(y)
                .map(|(v, yi)| ysum * (v - lse).exp() - yi)
                .collect();
            (loss, grad)
        }
    }
}

/// Accumulates `scale * d loss(x, y) / d theta` into `grad` and returns the loss.
fn backprop_into(
    params: &Params,
    x: &[f64],
    y: &[f64],
    kind: LossKind,
    scale: f64,
    grad: &mut Params,
) -> Result<f64> {
    let fwd = forward(params, x)?;
    if y.len() != fwd.output.len() {
        return Err(Error::shape(format!(
            "target has length {}, network outputs {}",
            y.len(),
            fwd.output.len()
        )));
    }
    let (loss, mut delta) = pointwise_loss(kind, &fwd.output, y);
    let n = params.num_layers();
    for l in (0..n).rev() {
        let input: Vec<f64> = if l == 0 {
            x.to_vec()
        } else {
            relu(&fwd.preacts[l - 1])
        };
        let cols = params.dims[l];
        {
            let gw = grad.weights_mut(l);
            for (i, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (g, &h) in gw[i * cols..(i + 1) * cols].iter_mut().zip(&input) {
                        *g += scale * d * h;
                    }
                }
            }
        }
        for (g, &d) in grad.biases_mut(l).iter_mut().zip(&delta) {
            *g += scale * d;
        }
        if l > 0 {
            let w = params.weights(l);
            let z_prev = &fwd.preacts[l - 1];
            let mut prev = vec![0.0; cols];
            for (i, &d) in delta.iter().enumerate() {
                for (j, p) in prev.iter_mut().enumerate() {
                    *p += w[i * cols + j] * d;
                }
            }
            for (p, &z) in prev.iter_mut().zip(z_prev) {
                if z <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
    Ok(loss)
}

/// Mean per-example loss and its exact reverse-mode gradient.
pub fn loss_and_grad(params: &Params, data: &Dataset) -> Result<(f64, Params)> {
    if data.is_empty() {
        return Err(Error::Empty("dataset has no examples".into()));
    }
    let scale = 1.0 / data.len() as f64;
    let mut grad = params.zeros_like();
    let mut total = 0.0;
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        total += backprop_into(params, x, y, data.loss_kind, scale, &mut grad)?;
    }
    let loss = total * scale;
    if !loss.is_finite() || !grad.is_finite() {
        return Err(Error::numeric("non-finite loss or gradient"));
    }
    Ok((loss, grad))
}

pub fn loss(params: &Params, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset has no examples".into()));
    }
    let mut total = 0.0;
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        let fwd = forward(params, x)?;
        if y.len() != fwd.output.len() {
            return Err(Error::shape("target length does not match network output"));
        }
        total += pointwise_loss(data.loss_kind, &fwd.output, y).0;
    }
    Ok(total / data.len() as f64)
}

/// Gradient of every example's loss separately.
pub fn per_example_grads(params: &Params, data: &Dataset) -> Result<Vec<Params>> {
    data.inputs
        .iter()
        .zip(&data.targets)
        .map(|(x, y)| {
            let mut g = params.zeros_like();
            backprop_into(params, x, y, data.loss_kind, 1.0, &mut g)?;
            Ok(g)
        })
        .collect()
}

fn hidden_bits(params: &Params, fwd: &Forward) -> ActivationPattern {
    let hidden = params.num_layers() - 1;
    ActivationPattern {
        bits: fwd.preacts[..hidden]
            .iter()
            .flat_map(|z| z.iter().map(|&v| v > 0.0))
            .collect(),
    }
}

pub fn activation_pattern(params: &Params, x: &[f64]) -> Result<ActivationPattern> {
    let fwd = forward(params, x)?;
    Ok(hidden_bits(params, &fwd))
}

/// Smallest absolute hidden pre-activation over all neurons and inputs.
/// Networks without hidden layers have no ReLU boundary: the margin is `+inf`.
pub fn margin(params: &Params, data: &Dataset) -> Result<f64> {
    margin_of_inputs(params, &data.inputs)
}

pub fn margin_of_inputs(params: &Params, inputs: &[Vec<f64>]) -> Result<f64> {
    let hidden = params.num_layers() - 1;
    let mut m = f64::INFINITY;
    for x in inputs {
        let fwd = forward(params, x)?;
        for z in &fwd.preacts[..hidden] {
            for v in z {
                m = m.min(v.abs());
            }
        }
    }
    Ok(m)
}

struct MaskedNorms<'a> {
    params: &'a Params,
    cache: HashMap<(usize, bool, Vec<bool>), SpectralNorm>,
}

impl<'a> MaskedNorms<'a> {
    fn new(params: &'a Params) -> Self {
        MaskedNorms {
            params,
            cache: HashMap::new(),
        }
    }

    /// Spectral norm of `W_l` with rows (`rows = true`) or columns masked.
    fn get(&mut self, l: usize, rows: bool, mask: Option<&[bool]>) -> SpectralNorm {
        let key = (l, rows, mask.map(|m| m.to_vec()).unwrap_or_default());
        let p = self.params;
        *self.cache.entry(key).or_insert_with(|| {
            let (r, c) = (p.dims[l + 1], p.dims[l]);
            if rows {
                linalg::spectral_norm(p.weights(l), r, c, mask, None)
            } else {
                linalg::spectral_norm(p.weights(l), r, c, None, mask)
            }
        })
    }
}

/// Input-space Lipschitz estimate of the network inside its current cones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub converged: bool,
}

/// Max over `probes` of the product of spectral norms of the active-masked
/// layer matrices `D_l W_l` (the output layer is unmasked). Without probes
/// every layer is taken unmasked.
pub fn lipschitz_estimate(params: &Params, probes: &[Vec<f64>]) -> Result<LipschitzEstimate> {
    if !params.is_finite() {
        return Err(Error::domain("parameters must be finite"));
    }
    let n = params.num_layers();
    let mut norms = MaskedNorms::new(params);
    let mut converged = true;
    let mut product_for = |masks: Option<&[Vec<bool>]>| {
        let mut prod = 1.0;
        for l in 0..n {
            let mask = if l + 1 < n {
                masks.map(|m| m[l].as_slice())
            } else {
                None
            };
            let s = norms.get(l, true, mask);
            converged &= s.converged;
            prod *= s.value;
        }
        prod
    };
    let value = if probes.is_empty() {
        product_for(None)
    } else {
        let mut best: f64 = 0.0;
        for x in probes {
            let masks = layer_masks(params, x)?;
            best = best.max(product_for(Some(&masks)));
        }
        best
    };
    Ok(LipschitzEstimate { value, converged })
}

fn layer_masks(params: &Params, x: &[f64]) -> Result<Vec<Vec<bool>>> {
    let fwd = forward(params, x)?;
    let hidden = params.num_layers() - 1;
    Ok(fwd.preacts[..hidden]
        .iter()
        .map(|z| z.iter().map(|&v| v > 0.0).collect())
        .collect())
}

/// First-order bound on how fast any hidden pre-activation can move per unit
/// of parameter displacement `|d theta|_2`, with the masks of the current cone.
///
/// For each probe `x` with hidden outputs `h_l` and masks `D_l`:
/// `S_1 = sqrt(|x|^2 + 1)`, `S_l = sqrt(|h_{l-1}|^2 + 1) + |W_l D_{l-1}|_2 S_{l-1}`.
/// Returns the max of `S_l` over probes and hidden layers (0 when there are no
/// hidden layers). A step shorter than `margin / (2 * value)` cannot flip a
/// mask up to second-order terms.
pub fn param_sensitivity(params: &Params, probes: &[Vec<f64>]) -> Result<f64> {
    let n = params.num_layers();
    let hidden = n - 1;
    let mut norms = MaskedNorms::new(params);
    let mut best: f64 = 0.0;
    for x in probes {
        let fwd = forward(params, x)?;
        let mut s = (linalg::dot(x, x) + 1.0).sqrt();
        for l in 0..hidden {
            if l > 0 {
                let h = relu(&fwd.preacts[l - 1]);
                let mask: Vec<bool> = fwd.preacts[l - 1].iter().map(|&v| v > 0.0).collect();
                let wn = norms.get(l, false, Some(&mask)).value;
                s = (linalg::dot(&h, &h) + 1.0).sqrt() + wn * s;
            }
            best = best.max(s);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Params {
        Params::from_layers(&[1, 1, 1], &[vec![2.0], vec![3.0]], &[vec![-1.0], vec![0.0]]).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = Params::zeros(&[3, 4, 2]).unwrap();
        let f = forward(&p, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(f.output, vec![0.0, 0.0]);
        assert!(f.preacts.iter().flatten().all(|&z| z == 0.0));
    }

    #[test]
    fn hand_evaluated_two_layer_net() {
        let p = tiny();
        let f = forward(&p, &[1.0]).unwrap();
        assert_eq!(f.preacts[0], vec![1.0]);
        assert_eq!(f.output, vec![3.0]);
        let f0 = forward(&p, &[0.0]).unwrap();
        assert_eq!(f0.preacts[0], vec![-1.0]);
        assert_eq!(f0.output, vec![0.0]);
        let pat = activation_pattern(&p, &[1.0]).unwrap();
        assert_eq!(pat.bits, vec![true]);
        assert_eq!(pat.k(), 1);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let p = tiny();
        assert!(matches!(forward(&p, &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(forward(&p, &[f64::NAN]), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_preactivation_is_inactive() {
        let p = Params::from_layers(&[1, 1, 1], &[vec![1.0], vec![1.0]], &[vec![0.0], vec![0.0]])
            .unwrap();
        let pat = activation_pattern(&p, &[0.0]).unwrap();
        assert_eq!(pat.bits, vec![false]);
        let data = Dataset::new(vec![vec![0.0]], vec![vec![0.0]], LossKind::SquaredError).unwrap();
        assert_eq!(margin(&p, &data).unwrap(), 0.0);
    }

    #[test]
    fn negative_biases_switch_everything_off() {
        let mut p = Params::zeros(&[3, 5, 4, 1]).unwrap();
        for l in 0..2 {
            p.weights_mut(l).iter_mut().for_each(|w| *w = 0.01);
            p.biases_mut(l).iter_mut().for_each(|b| *b = -10.0);
        }
        let pat = activation_pattern(&p, &[0.0; 3]).unwrap();
        assert_eq!(pat.len(), 9);
        assert_eq!(pat.k(), 0);
    }

    #[test]
    fn margin_is_min_abs_preactivation() {
        // z = w x with w = 1: inputs 0.3 and -0.5.
        let p = Params::from_layers(&[1, 1, 1], &[vec![1.0], vec![1.0]], &[vec![0.0], vec![0.0]])
            .unwrap();
        let data = Dataset::new(
            vec![vec![0.3], vec![-0.5]],
            vec![vec![0.0], vec![0.0]],
            LossKind::SquaredError,
        )
        .unwrap();
        assert!((margin(&p, &data).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_net_zero_targets_is_global_min() {
        let p = Params::zeros(&[2, 3, 1]).unwrap();
        let data = Dataset::new(
            vec![vec![1.0, 2.0], vec![-1.0, 0.5]],
            vec![vec![0.0], vec![0.0]],
            LossKind::SquaredError,
        )
        .unwrap();
        let (l, g) = loss_and_grad(&p, &data).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cross_entropy_is_stable_for_huge_logits() {
        let (l, g) = pointwise_loss(LossKind::CrossEntropyWithLogits, &[1000.0, -1000.0], &[1.0, 0.0]);
        assert!(l.is_finite() && l.abs() < 1e-12);
        assert!(g.iter().all(|v| v.is_finite()));
        let (l2, _) = pointwise_loss(LossKind::CrossEntropyWithLogits, &[0.0, 0.0], &[1.0, 0.0]);
        assert!((l2 - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_examples() {
        let id = Params::from_layers(&[2, 2], &[vec![1.0, 0.0, 0.0, 1.0]], &[vec![0.0, 0.0]]).unwrap();
        let e = lipschitz_estimate(&id, &[]).unwrap();
        assert!((e.value - 1.0).abs() < 1e-6);
        let d = Params::from_layers(&[2, 2], &[vec![3.0, 0.0, 0.0, 1.0]], &[vec![0.0, 0.0]]).unwrap();
        assert!((lipschitz_estimate(&d, &[]).unwrap().value - 3.0).abs() < 1e-6);
        let z = Params::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(lipschitz_estimate(&z, &[vec![1.0, 1.0, 1.0]]).unwrap().value, 0.0);
    }

    #[test]
    fn parameter_counts() {
        let p = Params::zeros(&[4, 8, 8, 1]).unwrap();
        assert_eq!(p.len(), 8 * 5 + 8 * 9 + 9);
        assert_eq!(p.lifted_len(), 9 * 5 + 9 * 9 + 2 * 9);
        assert_eq!(p.hidden_neurons(), 16);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = NetConfig {
            layer_dims: vec![4, 8, 1],
            init_scale: 0.5,
            seed: 7,
        };
        let a = Params::init(&cfg).unwrap();
        let b = Params::init(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.weights(0).iter().all(|w| w.abs() <= 0.25));
        assert!(a.biases(0).iter().all(|b| b.abs() <= 0.5));
    }
}
