//! Oracles and fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use relulab::arrangement::Arrangement;
use relulab::harness::ExperimentConfig;
use relulab::optim::OptimState;
use relulab::relunet::{self, Dataset, LossKind, NetConfig, Params};

pub fn reference_config() -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/reference.cfg");
    ExperimentConfig::from_file(&path).expect("reference config parses")
}

/// Central differences of the mean loss, one coordinate at a time.
pub fn fd_gradient(params: &Params, data: &Dataset, h: f64) -> Vec<f64> {
    let mut p = params.clone();
    (0..params.len())
        .map(|i| {
            let x0 = p.as_slice()[i];
            p.as_mut_slice()[i] = x0 + h;
            let up = relunet::loss(&p, data).unwrap();
            p.as_mut_slice()[i] = x0 - h;
            let down = relunet::loss(&p, data).unwrap();
            p.as_mut_slice()[i] = x0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// A seeded (params, single-example dataset) pair whose pre-activations all
/// stay at least `min_abs_z` away from zero; redraws until one is found.
pub fn gradient_case(seed: u64, min_abs_z: f64) -> (Params, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let depth = rng.gen_range(1..=3);
        let mut dims = vec![rng.gen_range(1..=4)];
        for _ in 0..depth {
            dims.push(rng.gen_range(1..=5));
        }
        dims.push(rng.gen_range(1..=3));
        let params = Params::init(&NetConfig {
            layer_dims: dims.clone(),
            init_scale: 1.0,
            seed: rng.gen(),
        })
        .unwrap();
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.sample(StandardNormal)).collect();
        let kind = if rng.gen_bool(0.5) {
            LossKind::SquaredError
        } else {
            LossKind::CrossEntropyWithLogits
        };
        let d_out = *dims.last().unwrap();
        let y: Vec<f64> = match kind {
            LossKind::SquaredError => (0..d_out).map(|_| rng.sample(StandardNormal)).collect(),
            LossKind::CrossEntropyWithLogits => {
                let c = rng.gen_range(0..d_out);
                (0..d_out).map(|i| (i == c) as u8 as f64).collect()
            }
        };
        let f = relunet::forward(&params, &x).unwrap();
        if f.preacts.iter().flatten().all(|z| z.abs() > min_abs_z) {
            let data = Dataset::new(vec![x], vec![y], kind).unwrap();
            return (params, data);
        }
    }
}

/// Gaussian normals and offsets; in general position with probability one.
pub fn random_arrangement(n: usize, d: usize, seed: u64) -> Arrangement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hs: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            (w, rng.sample(StandardNormal))
        })
        .collect();
    Arrangement::new(d, &hs).unwrap()
}

/// Three lines through the origin.
pub fn concurrent_lines() -> Arrangement {
    Arrangement::new(2, &[(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0), (vec![1.0, 1.0], 0.0)]).unwrap()
}

pub fn generic_three_lines_text() -> &'static str {
    "# three lines in general position\n2 3\n1 0 0\n0 1 0\n1 1 1\n"
}

/// `integral_0^1 12 sqrt(ln(1/eps) / 2) d eps`, through `eps = e^{-u}` and a
/// midpoint rule on `[0, 60]`, which removes the endpoint singularity.
pub fn dudley_oracle() -> f64 {
    let n = 2_000_000;
    let h = 60.0 / n as f64;
    (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            12.0 * (u / 2.0).sqrt() * (-u).exp()
        })
        .sum::<f64>()
        * h
}

/// High-precision value of [`dudley_oracle`]'s integral, `6 sqrt(pi / 2)`.
pub const DUDLEY_EXACT: f64 = 7.519884823893001507;

/// `(eps, sqrt(1/eps))` on a log-spaced grid over `(0, 1]`.
pub fn sqrt_cover_profile(points: usize) -> Vec<(f64, f64)> {
    (0..points)
        .map(|i| {
            let eps = 10f64.powf(-8.0 * i as f64 / (points - 1) as f64);
            (eps, (1.0 / eps).sqrt())
        })
        .collect()
}

pub fn unit_segment_points(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64, 0.3]).collect()
}

/// `side x side` grid with cell-centred points in the unit square.
pub fn square_grid_points(side: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            pts.push(vec![(i as f64 + 0.5) / side as f64, (j as f64 + 0.5) / side as f64]);
        }
    }
    pts
}

pub fn rotate(points: &[Vec<f64>], angle: f64, center: [f64; 2]) -> Vec<Vec<f64>> {
    let (s, c) = angle.sin_cos();
    points
        .iter()
        .map(|p| {
            let (x, y) = (p[0] - center[0], p[1] - center[1]);
            vec![center[0] + c * x - s * y, center[1] + s * x + c * y]
        })
        .collect()
}

/// Dyadic scales fine enough that boundary boxes of a rotated unit set are a
/// small fraction of the count.
pub fn box_scales() -> Vec<f64> {
    (5..=9).map(|k| 0.5f64.powi(k)).collect()
}

/// Synthetic gradient stream for the second-moment floor: `g = Q D^{1/2} u`
/// with `u` uniform on `[-sqrt 3, sqrt 3]^2`, so the covariance is
/// `Q diag(lambda) Q^T` and every coordinate variance is at least
/// `min(lambda)`.
pub struct FloorStream {
    pub q: [[f64; 2]; 2],
    pub lambda: [f64; 2],
}

impl FloorStream {
    pub fn standard() -> Self {
        let (s, c) = (std::f64::consts::PI / 6.0).sin_cos();
        FloorStream {
            q: [[c, -s], [s, c]],
            lambda: [0.25, 0.4],
        }
    }

    /// Largest possible absolute coordinate.
    pub fn coord_bound(&self) -> f64 {
        (0..2)
            .map(|j| (0..2).map(|k| self.q[j][k].abs() * (3.0 * self.lambda[k]).sqrt()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn coord_variances(&self) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = (0..2).map(|k| self.q[j][k].powi(2) * self.lambda[k]).sum();
        }
        v
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        let r = 3f64.sqrt();
        let u = [rng.gen_range(-r..r), rng.gen_range(-r..r)];
        let mut g = [0.0; 2];
        for j in 0..2 {
            g[j] = (0..2).map(|k| self.q[j][k] * self.lambda[k].sqrt() * u[k]).sum();
        }
        g
    }

    /// Minimum over `t in [from, to]` of the smallest bias-corrected second
    /// moment, using the optimizer's bias correction.
    pub fn min_vhat_after(&self, seed: u64, beta2: f64, from: u64, to: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = OptimState::new(2);
        let mut worst = f64::INFINITY;
        // The moment recursion only; adam_step would also move the parameters.
        for t in 1..=to {
            let g = self.sample(&mut rng);
            for j in 0..2 {
                state.v[j] = beta2 * state.v[j] + (1.0 - beta2) * g[j] * g[j];
            }
            state.t = t;
            if t >= from {
                worst = worst.min(state.min_vhat(beta2));
            }
        }
        worst
    }
}
