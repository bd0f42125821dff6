//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};

pub(crate) const POWER_ITER_MAX: usize = 1000;
const POWER_ITER_TOL: f64 = 1e-14;

/// Result of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    pub converged: bool,
}

/// Largest singular value of the `rows x cols` row-major matrix `a`, with
/// optional row and column masks (`false` zeroes the row or column).
pub fn spectral_norm(
    a: &[f64],
    rows: usize,
    cols: usize,
    row_mask: Option<&[bool]>,
    col_mask: Option<&[bool]>,
) -> SpectralNorm {
    debug_assert_eq!(a.len(), rows * cols);
    let keep_row = |i: usize| row_mask.map_or(true, |m| m[i]);
    let keep_col = |j: usize| col_mask.map_or(true, |m| m[j]);
    let entry = |i: usize, j: usize| {
        if keep_row(i) && keep_col(j) {
            a[i * cols + j]
        } else {
            0.0
        }
    };

    // Start from the heaviest column plus a small generic perturbation so the
    // start vector is never orthogonal to the top right-singular vector.
    let mut best = (0usize, 0.0f64);
    for j in 0..cols {
        let n: f64 = (0..rows).map(|i| entry(i, j).powi(2)).sum();
        if n > best.1 {
            best = (j, n);
        }
    }
    if best.1 == 0.0 {
        return SpectralNorm {
            value: 0.0,
            converged: true,
        };
    }
    let mut x: Vec<f64> = (0..cols)
        .map(|j| 1e-3 * (((j * 7919 + 17) % 101) as f64 / 101.0 + 0.5))
        .collect();
    x[best.0] += 1.0;
    normalize(&mut x);

    let mut ax = vec![0.0; rows];
    let mut y = vec![0.0; cols];
    let mut prev = 0.0;
    for _ in 0..POWER_ITER_MAX {
        for (i, slot) in ax.iter_mut().enumerate() {
            *slot = (0..cols).map(|j| entry(i, j) * x[j]).sum();
        }
        for (j, slot) in y.iter_mut().enumerate() {
            *slot = (0..rows).map(|i| entry(i, j) * ax[i]).sum();
        }
        let lambda = norm2(&y);
        if lambda == 0.0 {
            return SpectralNorm {
                value: 0.0,
                converged: true,
            };
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / lambda;
        }
        if (lambda - prev).abs() <= POWER_ITER_TOL * lambda {
            return SpectralNorm {
                value: lambda.sqrt(),
                converged: true,
            };
        }
        prev = lambda;
    }
    log::warn!("power iteration did not converge after {POWER_ITER_MAX} iterations");
    SpectralNorm {
        value: prev.sqrt(),
        converged: false,
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize(a: &mut [f64]) -> f64 {
    let n = norm2(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Gram matrix `G[i][j] = <v_i, v_j>`.
pub(crate) fn gram(vectors: &[&[f64]]) -> DMatrix<f64> {
    let n = vectors.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let d = dot(vectors[i], vectors[j]);
            g[(i, j)] = d;
            g[(j, i)] = d;
        }
    }
    g
}

/// Scatter matrix `sum_i v_i v_i^T`.
pub(crate) fn scatter(vectors: &[&[f64]]) -> DMatrix<f64> {
    let dim = vectors.first().map_or(0, |v| v.len());
    let mut s = DMatrix::zeros(dim, dim);
    for v in vectors {
        for i in 0..dim {
            if v[i] == 0.0 {
                continue;
            }
            for j in i..dim {
                s[(i, j)] += v[i] * v[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }
    s
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue.
pub(crate) fn sym_eigen_desc(m: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Top-`k` orthonormal principal directions (uncentered) of `vectors`, via
/// the Gram matrix. Directions whose eigenvalue falls below
/// `rel_tol * lambda_max` are dropped, so fewer than `k` may be returned.
pub(crate) fn principal_directions(vectors: &[&[f64]], k: usize, rel_tol: f64) -> Vec<Vec<f64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let dim = vectors[0].len();
    // Work in whichever of the Gram (n x n) or scatter (dim x dim) matrices is smaller.
    let via_gram = vectors.len() <= dim;
    let pairs = if via_gram {
        sym_eigen_desc(gram(vectors))
    } else {
        sym_eigen_desc(scatter(vectors))
    };
    let lmax = pairs.first().map_or(0.0, |p| p.0);
    if lmax <= 0.0 {
        return Vec::new();
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (lambda, u) in pairs.into_iter().take(k) {
        if lambda <= rel_tol * lmax {
            break;
        }
        let mut dir = if via_gram {
            // X^T u is proportional to the corresponding right-singular vector.
            let mut dir = vec![0.0; dim];
            for (v, &ui) in vectors.iter().zip(&u) {
                for (d, &x) in dir.iter_mut().zip(v.iter()) {
                    *d += ui * x;
                }
            }
            dir
        } else {
            u
        };
        // Re-orthogonalize against earlier directions to clean rounding.
        for b in &basis {
            let p = dot(&dir, b);
            dir.iter_mut().zip(b).for_each(|(d, bi)| *d -= p * bi);
        }
        if normalize(&mut dir) > 0.0 {
            basis.push(dir);
        }
    }
    basis
}
