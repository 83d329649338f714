//! Shared helpers for unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{norm2, normalize, Matrix};
use crate::tensor::{rank_one_expand, DenseTensor, FactorSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let mut r = rng(seed);
    DenseTensor::from_fn(dims.to_vec(), |_| r.random_range(-1.0..1.0)).unwrap()
}

pub fn random_unit(n: usize, r: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    v
}

pub fn random_factors(dims: &[usize], seed: u64) -> FactorSet {
    let mut r = rng(seed);
    FactorSet::new(0.0, dims.iter().map(|&n| random_unit(n, &mut r)).collect()).unwrap()
}

pub fn rank_one_tensor(lambda: f64, dims: &[usize], seed: u64) -> (DenseTensor, FactorSet) {
    let mut f = random_factors(dims, seed);
    f.lambda = lambda;
    (rank_one_expand(&f, dims).unwrap(), f)
}

/// One-sided Jacobi SVD; returns the top singular triple `(σ, u, v)` of `a`.
pub fn top_singular_triple(a: &Matrix) -> (f64, Vec<f64>, Vec<f64>) {
    let (m, n) = (a.rows(), a.cols());
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = (0..m).map(|i| u[(i, p)] * u[(i, p)]).sum();
                let beta: f64 = (0..m).map(|i| u[(i, q)] * u[(i, q)]).sum();
                let gamma: f64 = (0..m).map(|i| u[(i, p)] * u[(i, q)]).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * x - s * y;
                    u[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| norm2(&u.column(j))).collect();
    let k = (0..n)
        .max_by(|&a, &b| norms[a].total_cmp(&norms[b]))
        .unwrap();
    let mut left = u.column(k);
    normalize(&mut left);
    (norms[k], left, v.column(k))
}
