//! Seeded synthetic tasks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relunet::{self, Dataset, LossKind, NetConfig, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    GaussianBlobs,
    TeacherNet,
    XorRing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n_samples: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            kind: DatasetKind::TeacherNet,
            n_samples: 64,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("dataset.n_samples must be >= 1".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config("dataset.noise must be finite and >= 0".into()));
        }
        Ok(())
    }
}

// Keeps the teacher's stream apart from the input stream.
const TEACHER_SALT: u64 = 0x7465_6163_6865_72;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// The frozen network that labels a `teacher_net` task.
pub fn teacher_params(spec: &DatasetSpec, layer_dims: &[usize]) -> Result<Params> {
    Params::init(&NetConfig {
        layer_dims: layer_dims.to_vec(),
        init_scale: 1.0,
        seed: spec.seed ^ TEACHER_SALT,
    })
}

/// Inputs have width `layer_dims[0]` and targets width `layer_dims.last()`.
pub fn generate_dataset(spec: &DatasetSpec, layer_dims: &[usize]) -> Result<Dataset> {
    spec.validate()?;
    if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::Config(format!("invalid layer dims {layer_dims:?}")));
    }
    let d_in = layer_dims[0];
    let d_out = *layer_dims.last().expect("len >= 2");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_samples;
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    // One output: +-1 regression targets. Several: one-hot classes under cross-entropy.
    let label = |class: usize, classes: usize| -> Vec<f64> {
        if d_out == 1 {
            vec![if class == 0 { -1.0 } else { 1.0 }]
        } else {
            (0..classes).map(|c| (c == class) as u8 as f64).collect()
        }
    };
    let classified = if d_out == 1 {
        LossKind::SquaredError
    } else {
        LossKind::CrossEntropyWithLogits
    };
    let loss_kind = match spec.kind {
        DatasetKind::GaussianBlobs => {
            let classes = d_out.max(2);
            let centers: Vec<Vec<f64>> = (0..classes)
                .map(|_| (0..d_in).map(|_| 3.0 * gaussian(&mut rng)).collect())
                .collect();
            for i in 0..n {
                let c = i % classes;
                inputs.push(centers[c].iter().map(|m| m + spec.noise * gaussian(&mut rng)).collect());
                targets.push(label(c, classes));
            }
            classified
        }
        DatasetKind::TeacherNet => {
            let teacher = teacher_params(spec, layer_dims)?;
            for _ in 0..n {
                let x: Vec<f64> = (0..d_in).map(|_| gaussian(&mut rng)).collect();
                let mut y = relunet::forward(&teacher, &x)?.output;
                y.iter_mut().for_each(|v| *v += spec.noise * gaussian(&mut rng));
                inputs.push(x);
                targets.push(y);
            }
            LossKind::SquaredError
        }
        DatasetKind::XorRing => {
            if d_in != 2 || d_out > 2 {
                return Err(Error::Config("xor_ring needs 2 inputs and 1 or 2 outputs".into()));
            }
            // Quadrant parity, flipped outside radius 0.7.
            for _ in 0..n {
                let x: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let c = ((x[0] * x[1] > 0.0) ^ (x[0].hypot(x[1]) > 0.7)) as usize;
                inputs.push(vec![
                    x[0] + spec.noise * gaussian(&mut rng),
                    x[1] + spec.noise * gaussian(&mut rng),
                ]);
                targets.push(label(c, 2));
            }
            classified
        }
    };
    Dataset::new(inputs, targets, loss_kind)
}
