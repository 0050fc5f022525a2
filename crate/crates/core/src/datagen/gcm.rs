//! Globally coupled quadratic maps with randomized parameters.
//!
//! Each map follows `f(x, a) = 1 - a x²`. In the randomized variant map `i`
//! has nonlinearity `a_i = a + (1 - a) ε_i` and couples to map `i'` with
//! weight `g_ii' = (1 - c) δ_ii' + c ε_ii'`:
//!
//! `x_i(t+1) = g_ii f(x_i(t), a_i) + (1/N) Σ_i' g_ii' f(x_i'(t), a_i')`.
//!
//! The classic variant uses one `a` and a uniform coupling `g` (taken from
//! the `c` field): `x_i(t+1) = (1 - g) f(x_i(t), a) + (g/N) Σ_i' f(x_i'(t), a)`.
//!
//! All `ε` and the initial states are uniform on `[0, 1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{self, uniform};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Magnitude beyond which a trajectory counts as diverged.
const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcmParams {
    pub n: usize,
    pub steps: usize,
    pub a: f64,
    /// Coupling randomization strength; the uniform coupling `g` when `classic`.
    pub c: f64,
    pub seed: u64,
    pub classic: bool,
    /// Largest coupling matrix (in bytes) kept in memory. Above it, coupling
    /// rows are regenerated from their streams at every step; the output is
    /// the same either way.
    pub coupling_cache_bytes: u64,
}

impl Default for GcmParams {
    fn default() -> Self {
        Self {
            n: 10_000,
            steps: 100,
            a: 1.75,
            c: 0.04,
            seed: 0,
            classic: false,
            coupling_cache_bytes: 1 << 30,
        }
    }
}

impl GcmParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.steps == 0 {
            return Err(Error::arg("n and steps must be positive"));
        }
        if !self.a.is_finite() || !self.c.is_finite() {
            return Err(Error::arg("a and c must be finite"));
        }
        Ok(())
    }
}

fn f(x: f64, a: f64) -> f64 {
    1.0 - a * x * x
}

/// Coupling weights `g_ii'` for one row, drawn from the row's own stream.
fn coupling_row(seed: u64, i: usize, n: usize, c: f64, out: &mut [f64]) {
    let mut s = rng::stream(seed, rng::GCM_COUPLING_ROW, i as u64);
    for (ip, g) in out.iter_mut().enumerate().take(n) {
        let delta = if ip == i { 1.0 - c } else { 0.0 };
        *g = delta + c * uniform(&mut s);
    }
}

/// `n x steps` trajectory; column `t` holds the state after `t + 1` updates
/// (the initial state is not included).
pub fn simulate_rcs_gcm(p: &GcmParams) -> Result<Matrix> {
    p.validate()?;
    let n = p.n;
    let mut init_rng = rng::stream(p.seed, rng::GCM_INITIAL, 0);
    let mut x: Vec<f64> = (0..n).map(|_| uniform(&mut init_rng)).collect();
    let a_i: Vec<f64> = if p.classic {
        vec![p.a; n]
    } else {
        let mut s = rng::stream(p.seed, rng::GCM_NONLINEARITY, 0);
        (0..n)
            .map(|_| p.a + (1.0 - p.a) * uniform(&mut s))
            .collect()
    };

    let dense = !p.classic && (n as u128 * n as u128 * 8) <= p.coupling_cache_bytes as u128;
    let cache: Option<Vec<f64>> = dense.then(|| {
        let mut g = vec![0.0; n * n];
        g.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| coupling_row(p.seed, i, n, p.c, row));
        g
    });

    let mut out = vec![0.0; n * p.steps];
    let inv_n = 1.0 / n as f64;
    for step in 0..p.steps {
        let fx: Vec<f64> = x.iter().zip(&a_i).map(|(&v, &a)| f(v, a)).collect();
        let next: Vec<f64> = if p.classic {
            let mean_term = p.c * inv_n * fx.iter().sum::<f64>();
            fx.iter().map(|&v| (1.0 - p.c) * v + mean_term).collect()
        } else {
            (0..n)
                .into_par_iter()
                .map_init(
                    || vec![0.0; if dense { 0 } else { n }],
                    |buf, i| {
                        let g: &[f64] = match &cache {
                            Some(all) => &all[i * n..(i + 1) * n],
                            None => {
                                coupling_row(p.seed, i, n, p.c, buf);
                                buf
                            }
                        };
                        let coupled: f64 = g.iter().zip(&fx).map(|(w, v)| w * v).sum();
                        g[i] * fx[i] + inv_n * coupled
                    },
                )
                .collect()
        };
        if let Some(v) = next.iter().find(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(Error::Divergence {
                step: step + 1,
                value: v.abs(),
            });
        }
        for (i, v) in next.iter().enumerate() {
            out[i * p.steps + step] = *v;
        }
        x = next;
    }
    Matrix::new(n, p.steps, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> GcmParams {
        GcmParams {
            n: 300,
            steps: 50,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn uncoupled_classic_maps_follow_scalar_iteration() {
        let p = GcmParams {
            n: 20,
            steps: 30,
            a: 1.75,
            c: 0.0,
            seed: 4,
            classic: true,
            ..Default::default()
        };
        let traj = simulate_rcs_gcm(&p).unwrap();
        let mut init = rng::stream(4, rng::GCM_INITIAL, 0);
        for i in 0..20 {
            let mut v = uniform(&mut init);
            for t in 0..30 {
                v = 1.0 - 1.75 * v * v;
                assert_eq!(traj[(i, t)].to_bits(), v.to_bits(), "map {i} step {t}");
            }
        }
    }

    #[test]
    fn cached_and_streamed_coupling_agree() {
        let dense = simulate_rcs_gcm(&small(7)).unwrap();
        let streamed = simulate_rcs_gcm(&GcmParams {
            coupling_cache_bytes: 0,
            ..small(7)
        })
        .unwrap();
        assert_eq!(dense, streamed);
        assert_eq!(dense, simulate_rcs_gcm(&small(7)).unwrap());
        assert_ne!(dense, simulate_rcs_gcm(&small(8)).unwrap());
    }

    #[test]
    fn trajectories_stay_bounded() {
        let traj = simulate_rcs_gcm(&GcmParams {
            n: 1000,
            steps: 100,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(traj.shape(), (1000, 100));
        assert!(traj.as_slice().iter().all(|v| v.abs() < 2.0));
    }

    #[test]
    fn one_step_matches_the_formula() {
        let p = GcmParams {
            n: 5,
            steps: 1,
            seed: 3,
            ..Default::default()
        };
        let traj = simulate_rcs_gcm(&p).unwrap();
        let mut init = rng::stream(3, rng::GCM_INITIAL, 0);
        let x0: Vec<f64> = (0..5).map(|_| uniform(&mut init)).collect();
        let mut ar = rng::stream(3, rng::GCM_NONLINEARITY, 0);
        let a: Vec<f64> = (0..5)
            .map(|_| 1.75 + (1.0 - 1.75) * uniform(&mut ar))
            .collect();
        for i in 0..5 {
            let mut cr = rng::stream(3, rng::GCM_COUPLING_ROW, i as u64);
            let eps: Vec<f64> = (0..5).map(|_| uniform(&mut cr)).collect();
            let g = |ip: usize| (if ip == i { 1.0 - 0.04 } else { 0.0 }) + 0.04 * eps[ip];
            let fx = |ip: usize| 1.0 - a[ip] * x0[ip] * x0[ip];
            let expected = g(i) * fx(i) + (0..5).map(|ip| g(ip) * fx(ip)).sum::<f64>() / 5.0;
            assert!((traj[(i, 0)] - expected).abs() < 1e-14);
            assert!((1.0..=1.75).contains(&a[i]));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let p = GcmParams {
            n: 4,
            steps: 50,
            a: 5.0,
            c: 0.0,
            classic: true,
            ..Default::default()
        };
        assert!(matches!(
            simulate_rcs_gcm(&p),
            Err(Error::Divergence { .. })
        ));
    }
}
