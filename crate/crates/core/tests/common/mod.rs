//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use btud::datagen::{standard_normal, stream, uniform};
use btud::decomp::TuckerModel;
use btud::linalg::orthonormalize_rows;
use btud::{Matrix, Tensor3};
use rand_chacha::ChaCha8Rng;

/// Stream domain reserved for test fixtures, away from the generators' own.
const TEST_DOMAIN: u64 = 0xBEEF;

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(stream(seed, TEST_DOMAIN, 0))
    }

    pub fn uniform(&mut self) -> f64 {
        uniform(&mut self.0)
    }

    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }

    pub fn normal(&mut self) -> f64 {
        standard_normal(&mut self.0)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

pub fn random_tensor(dims: (usize, usize, usize), rng: &mut Rng) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| rng.normal())
}

pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let mut u = random_matrix(rows, cols, rng);
    for r in 0..rows {
        u = orthonormalize_rows(&u, r).unwrap();
    }
    u
}

pub fn random_model(
    dims: (usize, usize, usize),
    ranks: (usize, usize, usize),
    rng: &mut Rng,
) -> TuckerModel {
    let core = Tensor3::from_fn(ranks, |_, _, _| 3.0 * rng.symmetric());
    let u1 = random_orthonormal(ranks.0, dims.0, rng);
    let u2 = random_orthonormal(ranks.1, dims.1, rng);
    let u3 = random_orthonormal(ranks.2, dims.2, rng);
    TuckerModel::new(core, u1, u2, u3).unwrap()
}

/// Benjamini–Hochberg by its definition: `min_{k >= rank(i)} p_(k) n / k`,
/// clipped at 1, computed with a quadratic scan.
pub fn bh_brute_force(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    (0..n)
        .map(|i| {
            // rank of p[i] with ties broken by index, matching a stable sort
            let rank = (0..n)
                .filter(|&j| p[j] < p[i] || (p[j] == p[i] && j <= i))
                .count();
            let mut best = f64::INFINITY;
            for j in 0..n {
                let rj = (0..n)
                    .filter(|&k| p[k] < p[j] || (p[k] == p[j] && k <= j))
                    .count();
                if rj >= rank {
                    best = best.min(p[j] * n as f64 / rj as f64);
                }
            }
            best.min(1.0)
        })
        .collect()
}
