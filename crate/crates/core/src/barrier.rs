//! Loss along straight segments and piecewise-linear paths in parameter
//! space.
//!
//! The sup along a segment is taken over `resolution + 1` equally spaced
//! points including both endpoints, so every reported barrier is a lower
//! bound on the true one. Nested grids (doubling the resolution) can only
//! raise the reported max.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relunet::{self, Dataset, Params};

pub const DEFAULT_RESOLUTION: usize = 256;

/// Something that can be evaluated along a path.
pub trait Objective: Sync {
    fn loss(&self, p: &Params) -> Result<f64>;
    fn grad_norm(&self, p: &Params) -> Result<f64>;
}

impl Objective for Dataset {
    fn loss(&self, p: &Params) -> Result<f64> {
        relunet::loss(p, self)
    }

    fn grad_norm(&self, p: &Params) -> Result<f64> {
        Ok(relunet::loss_and_grad(p, self)?.1.norm2())
    }
}

/// Closed-form objective on the flat parameter vector, mostly for tests and
/// calibration.
pub struct FnObjective<L, G> {
    pub loss: L,
    pub grad_norm: G,
}

impl<L, G> Objective for FnObjective<L, G>
where
    L: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    fn loss(&self, p: &Params) -> Result<f64> {
        Ok((self.loss)(p.as_slice()))
    }

    fn grad_norm(&self, p: &Params) -> Result<f64> {
        Ok((self.grad_norm)(p.as_slice()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentBarrier {
    pub max_loss: f64,
    pub argmax_alpha: f64,
    pub endpoint_max: f64,
    /// Max gradient norm over the same grid; only filled by [`path_barrier`].
    pub grad_max: Option<f64>,
}

impl SegmentBarrier {
    /// `max_loss - max(L(a), L(b))`.
    pub fn excess(&self) -> f64 {
        self.max_loss - self.endpoint_max
    }

    /// Barrier height against a reference minimum.
    pub fn height(&self, l_star: f64) -> f64 {
        self.max_loss - l_star
    }
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < 2 {
        return Err(Error::domain("barrier resolution must be >= 2"));
    }
    Ok(())
}

fn scan(
    a: &Params,
    b: &Params,
    obj: &dyn Objective,
    resolution: usize,
    with_grad: bool,
) -> Result<SegmentBarrier> {
    a.check_compatible(b)?;
    let mut max_loss = f64::NEG_INFINITY;
    let mut argmax = 0.0;
    let mut ends = [0.0; 2];
    let mut grad_max: f64 = 0.0;
    for i in 0..=resolution {
        let alpha = i as f64 / resolution as f64;
        let p = Params::lerp(a, b, alpha)?;
        let l = obj.loss(&p)?;
        if i == 0 {
            ends[0] = l;
        }
        if i == resolution {
            ends[1] = l;
        }
        // Strict comparison keeps the first maximizer.
        if l > max_loss {
            max_loss = l;
            argmax = alpha;
        }
        if with_grad {
            grad_max = grad_max.max(obj.grad_norm(&p)?);
        }
    }
    Ok(SegmentBarrier {
        max_loss,
        argmax_alpha: argmax,
        endpoint_max: ends[0].max(ends[1]),
        grad_max: with_grad.then_some(grad_max),
    })
}

pub fn segment_barrier(a: &Params, b: &Params, obj: &dyn Objective, resolution: usize) -> Result<SegmentBarrier> {
    check_resolution(resolution)?;
    scan(a, b, obj, resolution, false)
}

/// Waypoints of a piecewise-linear path plus the per-segment sampling density.
#[derive(Debug, Clone)]
pub struct PathSpec {
    pub waypoints: Vec<Params>,
    pub resolution: usize,
}

impl PathSpec {
    pub fn new(waypoints: Vec<Params>, resolution: usize) -> Result<Self> {
        check_resolution(resolution)?;
        if waypoints.len() < 2 {
            return Err(Error::domain("a path needs at least two waypoints"));
        }
        for w in &waypoints[1..] {
            waypoints[0].check_compatible(w)?;
        }
        Ok(PathSpec { waypoints, resolution })
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.waypoints
            .windows(2)
            .map(|w| w[1].sub(&w[0]).expect("checked compatible").norm2())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBarrier {
    pub max_loss: f64,
    pub per_segment: Vec<SegmentBarrier>,
    /// `max(L(start), L(end))` of the whole path.
    pub endpoint_max: f64,
    pub path_length: f64,
    /// Max gradient norm sampled along the path, the local stand-in for the
    /// loss Lipschitz constant.
    pub grad_max: f64,
    pub tolerance: f64,
    /// `endpoint_max + grad_max * path_length + tolerance`.
    pub ulb_bound: f64,
    pub ulb_holds: bool,
}

pub fn path_barrier(path: &PathSpec, obj: &dyn Objective) -> Result<PathBarrier> {
    let per_segment: Vec<SegmentBarrier> = path
        .waypoints
        .par_windows(2)
        .map(|w| scan(&w[0], &w[1], obj, path.resolution, true))
        .collect::<Result<_>>()?;
    let max_loss = per_segment
        .iter()
        .map(|s| s.max_loss)
        .fold(f64::NEG_INFINITY, f64::max);
    let grad_max = per_segment
        .iter()
        .filter_map(|s| s.grad_max)
        .fold(0.0, f64::max);
    let start = obj.loss(&path.waypoints[0])?;
    let end = obj.loss(path.waypoints.last().expect("two waypoints"))?;
    let endpoint_max = start.max(end);
    let path_length: f64 = path.segment_lengths().iter().sum();
    let tolerance = 1e-6 * (1.0 + max_loss.abs());
    let ulb_bound = endpoint_max + grad_max * path_length + tolerance;
    Ok(PathBarrier {
        max_loss,
        per_segment,
        endpoint_max,
        path_length,
        grad_max,
        tolerance,
        ulb_bound,
        ulb_holds: max_loss <= ulb_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumPair {
    pub i: usize,
    pub j: usize,
    pub loss_gap: f64,
    pub excess: f64,
}

/// Pairwise loss gaps and straight-segment barrier excess between minimizers
/// found from different seeds. A measurement, not an assertion.
pub fn equal_minimum_audit(minimizers: &[Params], obj: &dyn Objective, resolution: usize) -> Result<Vec<MinimumPair>> {
    check_resolution(resolution)?;
    let losses: Vec<f64> = minimizers.iter().map(|p| obj.loss(p)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..minimizers.len() {
        for j in i + 1..minimizers.len() {
            let seg = segment_barrier(&minimizers[i], &minimizers[j], obj, resolution)?;
            out.push(MinimumPair {
                i,
                j,
                loss_gap: (losses[i] - losses[j]).abs(),
                excess: seg.excess(),
            });
        }
    }
    Ok(out)
}
