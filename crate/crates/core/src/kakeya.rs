//! Directional coverage of the post-freeze trajectory carpet, box-counting
//! and covering-number estimates, and the Dudley entropy integral.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Straight step segments expressed in an orthonormal basis of the
/// effective subspace, scaled to unit diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Carpet {
    pub basis: Vec<Vec<f64>>,
    pub segments: Vec<(Vec<f64>, Vec<f64>)>,
    /// Factor applied to basis coordinates to reach unit diameter.
    pub scale: f64,
}

impl Carpet {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Unit directions of the nonzero segments.
    pub fn directions(&self) -> Vec<Vec<f64>> {
        self.segments
            .iter()
            .filter_map(|(a, b)| {
                let mut v: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
                (linalg::normalize(&mut v) > 0.0).then_some(v)
            })
            .collect()
    }

    pub fn endpoints(&self) -> Vec<Vec<f64>> {
        let mut pts: Vec<Vec<f64>> = self.segments.iter().map(|s| s.0.clone()).collect();
        if let Some(last) = self.segments.last() {
            pts.push(last.1.clone());
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarpetBuild {
    pub carpet: Carpet,
    pub achieved_rank: usize,
    /// `true` when fewer than the requested directions carry signal.
    pub reduced_rank: bool,
}

/// Chains `deltas` into a path from the origin, projects every step segment
/// onto the top principal directions of the deltas, and rescales the
/// result to unit diameter.
pub fn build_carpet(deltas: &[&[f64]], d_eff_target: usize) -> Result<CarpetBuild> {
    if d_eff_target == 0 {
        return Err(Error::domain("target dimension must be >= 1"));
    }
    let nonzero: Vec<&[f64]> = deltas
        .iter()
        .copied()
        .filter(|d| d.iter().any(|&x| x != 0.0))
        .collect();
    if nonzero.is_empty() {
        return Err(Error::Empty("carpet needs at least one nonzero delta".into()));
    }
    let dim = nonzero[0].len();
    if deltas.iter().any(|d| d.len() != dim) {
        return Err(Error::shape("deltas have different lengths"));
    }
    let basis = linalg::principal_directions(&nonzero, d_eff_target, 1e-12);
    let achieved = basis.len();
    if achieved < d_eff_target {
        log::warn!("carpet rank {achieved} is below the requested {d_eff_target}");
    }
    let project = |v: &[f64]| -> Vec<f64> { basis.iter().map(|b| linalg::dot(b, v)).collect() };
    let mut pos = vec![0.0; achieved];
    let mut segments = Vec::with_capacity(deltas.len());
    for d in deltas {
        let step = project(d);
        let end: Vec<f64> = pos.iter().zip(&step).map(|(a, b)| a + b).collect();
        segments.push((pos.clone(), end.clone()));
        pos = end;
    }
    let mut pts: Vec<&Vec<f64>> = segments.iter().map(|s| &s.0).collect();
    pts.push(&pos);
    let diameter = pts
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            pts[i + 1..]
                .iter()
                .map(|b| dist(a, b))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let scale = if diameter > 0.0 { 1.0 / diameter } else { 1.0 };
    for (a, b) in &mut segments {
        a.iter_mut().for_each(|x| *x *= scale);
        b.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(CarpetBuild {
        carpet: Carpet {
            basis,
            segments,
            scale,
        },
        achieved_rank: achieved,
        reduced_rank: achieved < d_eff_target,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// How test directions on the sphere are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSampler {
    /// Halton points with a seeded Cranley-Patterson shift, mapped to the
    /// sphere through Box-Muller.
    Halton { seed: u64 },
    MonteCarlo { seed: u64 },
}

impl Default for DirectionSampler {
    fn default() -> Self {
        DirectionSampler::Halton { seed: 0 }
    }
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    r
}

/// `n` unit vectors in `dim` dimensions. In one dimension the two
/// directions alternate.
pub fn sphere_directions(dim: usize, n: usize, sampler: DirectionSampler) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return Err(Error::domain("direction dimension must be >= 1"));
    }
    let pairs = dim.div_ceil(2);
    if 2 * pairs > PRIMES.len() {
        return Err(Error::SizeLimit(format!("quasi-random directions support dim <= {}", PRIMES.len())));
    }
    if dim == 1 {
        return Ok((0..n).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect());
    }
    let mut out = Vec::with_capacity(n);
    let (mut rng, shift): (ChaCha8Rng, Vec<f64>) = match sampler {
        DirectionSampler::Halton { seed } | DirectionSampler::MonteCarlo { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let shift = (0..2 * pairs).map(|_| rng.gen::<f64>()).collect();
            (rng, shift)
        }
    };
    let mut i = 1u64;
    while out.len() < n {
        let u: Vec<f64> = (0..2 * pairs)
            .map(|k| match sampler {
                DirectionSampler::Halton { .. } => (radical_inverse(i, PRIMES[k]) + shift[k]).fract(),
                DirectionSampler::MonteCarlo { .. } => rng.gen::<f64>(),
            })
            .collect();
        i += 1;
        let mut g = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let r = (-2.0 * (1.0 - u[2 * p]).max(f64::MIN_POSITIVE).ln()).sqrt();
            let phi = 2.0 * std::f64::consts::PI * u[2 * p + 1];
            g.push(r * phi.cos());
            g.push(r * phi.sin());
        }
        g.truncate(dim);
        if linalg::normalize(&mut g) > 0.0 {
            out.push(g);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered_fraction: f64,
    /// Max over directions of `1 - max_t |<u, v_t>|`.
    pub worst_gap: f64,
    pub n_dirs: usize,
}

/// Per-direction best alignment `max_t |<u, v_t>|`.
pub fn alignments(directions: &[Vec<f64>], segment_dirs: &[Vec<f64>]) -> Vec<f64> {
    directions
        .par_iter()
        .map(|u| {
            segment_dirs
                .iter()
                .map(|v| linalg::dot(u, v).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

pub fn directional_coverage(carpet: &Carpet, n_dirs: usize, eps: f64, sampler: DirectionSampler) -> Result<Coverage> {
    if n_dirs == 0 {
        return Err(Error::domain("n_dirs must be >= 1"));
    }
    let seg_dirs = carpet.directions();
    if seg_dirs.is_empty() || carpet.dim() == 0 {
        return Err(Error::Empty("carpet has no nonzero segments".into()));
    }
    let dirs = sphere_directions(carpet.dim(), n_dirs, sampler)?;
    Ok(coverage_of(&dirs, &seg_dirs, eps))
}

pub fn coverage_of(dirs: &[Vec<f64>], seg_dirs: &[Vec<f64>], eps: f64) -> Coverage {
    let best = alignments(dirs, seg_dirs);
    let covered = best.iter().filter(|&&a| a >= 1.0 - eps).count();
    Coverage {
        covered_fraction: covered as f64 / dirs.len() as f64,
        worst_gap: best.iter().map(|a| 1.0 - a).fold(0.0, f64::max),
        n_dirs: dirs.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub dim_estimate: f64,
    pub counts: Vec<u64>,
    pub degenerate: bool,
}

pub const MIN_BOX_POINTS: usize = 100;

/// Least-squares slope of `ln count` against `ln(1/scale)` over the given
/// decreasing scales, counting occupied axis-aligned boxes anchored at the
/// origin.
pub fn box_counting_dimension(points: &[Vec<f64>], scales: &[f64]) -> Result<BoxCount> {
    if points.is_empty() {
        return Err(Error::Empty("no points".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::shape("points have different dimensions"));
    }
    if points.iter().all(|p| p == &points[0]) {
        return Ok(BoxCount {
            dim_estimate: 0.0,
            counts: vec![1; scales.len()],
            degenerate: true,
        });
    }
    if points.len() < MIN_BOX_POINTS {
        return Err(Error::InsufficientData(format!(
            "box counting needs at least {MIN_BOX_POINTS} points"
        )));
    }
    if scales.len() < 2 {
        return Err(Error::domain("box counting needs at least two scales"));
    }
    if scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) || scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("scales must be positive and strictly decreasing"));
    }
    let counts: Vec<u64> = scales
        .par_iter()
        .map(|&s| {
            let boxes: HashSet<Vec<i64>> = points
                .iter()
                .map(|p| p.iter().map(|x| (x / s).floor() as i64).collect())
                .collect();
            boxes.len() as u64
        })
        .collect();
    let xs: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    Ok(BoxCount {
        dim_estimate: ls_slope(&xs, &ys),
        counts,
        degenerate: false,
    })
}

pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Farthest-point (Gonzalez) order: `radii[k]` is the distance from the
/// `k`-th chosen center to the earlier ones (`radii[0] = inf`). The sequence
/// is non-increasing, so the induced cover count is monotone in `eps`.
fn farthest_point_radii(points: &[Vec<f64>], stop_below: f64) -> Vec<f64> {
    let mut radii = vec![f64::INFINITY];
    let mut nearest: Vec<f64> = points.iter().map(|p| dist(p, &points[0])).collect();
    loop {
        let (idx, r) = nearest
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, d)| if d > best.1 { (i, d) } else { best });
        if r <= stop_below || r == 0.0 {
            break;
        }
        radii.push(r);
        let c = points[idx].clone();
        nearest
            .par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(n, p)| *n = n.min(dist(p, &c)));
    }
    radii
}

/// Number of greedy farthest-point centers needed so every point lies within
/// `eps` of a center. At most the optimal count at radius `eps / 2`.
pub fn covering_number(points: &[Vec<f64>], eps: f64) -> Result<u64> {
    Ok(covering_profile(points, &[eps])?[0])
}

/// [`covering_number`] at several radii, sharing one farthest-point pass.
pub fn covering_profile(points: &[Vec<f64>], eps: &[f64]) -> Result<Vec<u64>> {
    if eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::domain("eps must be > 0"));
    }
    if points.is_empty() {
        return Ok(vec![0; eps.len()]);
    }
    let smallest = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let radii = farthest_point_radii(points, smallest);
    Ok(eps
        .iter()
        .map(|&e| radii.iter().filter(|&&r| r > e).count() as u64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DudleyGap {
    pub value: f64,
    /// `lipschitz_product * 12 B sqrt(d_eff / n)` with `B` the largest radius.
    pub closed_form: Option<f64>,
}

/// `lipschitz_product * integral_0^B 12 sqrt(ln N(eps) / n) d eps` by the
/// trapezoid rule on the supplied radii; the piece below the smallest
/// radius uses the integrand value there. Counts are real so smooth
/// cover profiles can be fed in directly.
pub fn dudley_gap(
    cover_counts: &[(f64, f64)],
    n_samples: u64,
    lipschitz_product: f64,
    d_eff: Option<f64>,
) -> Result<DudleyGap> {
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be >= 1"));
    }
    if cover_counts.is_empty() {
        return Err(Error::Empty("no cover counts".into()));
    }
    if cover_counts.iter().any(|&(_, c)| !(c >= 1.0)) {
        return Err(Error::domain("cover counts must be >= 1"));
    }
    if cover_counts.iter().any(|&(e, _)| !(e > 0.0 && e.is_finite())) {
        return Err(Error::domain("radii must be positive and finite"));
    }
    let mut pts: Vec<(f64, f64)> = cover_counts.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = n_samples as f64;
    let f = |c: f64| 12.0 * (c.ln() / n).sqrt();
    let mut integral = pts[0].0 * f(pts[0].1);
    for w in pts.windows(2) {
        integral += 0.5 * (w[1].0 - w[0].0) * (f(w[0].1) + f(w[1].1));
    }
    let b = pts.last().expect("non-empty").0;
    Ok(DudleyGap {
        value: lipschitz_product * integral,
        closed_form: d_eff.map(|d| lipschitz_product * 12.0 * b * (d / n).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_axis_carpet() {
        let d: Vec<Vec<f64>> = (1..6).map(|i| vec![0.0, i as f64, 0.0]).collect();
        let refs: Vec<&[f64]> = d.iter().map(|v| v.as_slice()).collect();
        let b = build_carpet(&refs, 2).unwrap();
        assert_eq!(b.achieved_rank, 1);
        assert!(b.reduced_rank);
        assert!((b.carpet.basis[0][1].abs() - 1.0).abs() < 1e-12);
        let ends = b.carpet.endpoints();
        let diam = ends
            .iter()
            .flat_map(|a| ends.iter().map(move |c| dist(a, c)))
            .fold(0.0, f64::max);
        assert!((diam - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_deltas_fail() {
        let z = [0.0; 4];
        assert!(build_carpet(&[&z, &z], 1).is_err());
    }

    #[test]
    fn one_dimensional_coverage_is_full() {
        let carpet = Carpet {
            basis: vec![vec![1.0]],
            segments: vec![(vec![0.0], vec![0.3])],
            scale: 1.0,
        };
        let c = directional_coverage(&carpet, 10, 0.0, DirectionSampler::default()).unwrap();
        assert_eq!(c.covered_fraction, 1.0);
    }

    #[test]
    fn halton_directions_are_unit() {
        for dim in 2..6 {
            let ds = sphere_directions(dim, 50, DirectionSampler::Halton { seed: 3 }).unwrap();
            assert_eq!(ds.len(), 50);
            assert!(ds.iter().all(|d| (linalg::norm2(d) - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn covering_examples() {
        let same = vec![vec![1.0, 2.0]; 10];
        assert_eq!(covering_number(&same, 0.5).unwrap(), 1);
        let two = vec![vec![0.0], vec![3.0]];
        assert_eq!(covering_number(&two, 1.0).unwrap(), 2);
        let seg: Vec<Vec<f64>> = (0..=1000).map(|i| vec![i as f64 / 1000.0]).collect();
        let c = covering_number(&seg, 0.1).unwrap();
        assert!((5..=11).contains(&c), "{c}");
        assert!(covering_number(&seg, 0.0).is_err());
    }

    #[test]
    fn box_count_degenerate() {
        let one = vec![vec![0.5, 0.5]];
        let b = box_counting_dimension(&one, &[0.5, 0.25]).unwrap();
        assert_eq!(b.dim_estimate, 0.0);
        assert!(b.degenerate);
        let few: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        assert!(box_counting_dimension(&few, &[0.5, 0.25]).is_err());
    }

    #[test]
    fn dudley_trivial_and_errors() {
        let ones: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64 / 10.0, 1.0)).collect();
        assert_eq!(dudley_gap(&ones, 5, 1.0, None).unwrap().value, 0.0);
        assert!(dudley_gap(&[(0.5, 0.0)], 5, 1.0, None).is_err());
        assert!(dudley_gap(&ones, 0, 1.0, None).is_err());
    }
}
