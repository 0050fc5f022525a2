use serde::{Deserialize, Serialize};

use super::posterior::{posterior_core_stats, posterior_stats};
use super::TuckerModel;
use crate::error::Result;
use crate::tensor::{dot, Matrix, Mode, Tensor3};

/// Outcome of comparing a model with its own posterior means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// `max |u - m_u|` per mode after sign alignment.
    pub mode_deviation: [f64; 3],
    /// `max |G - m_G|`.
    pub core_deviation: f64,
    pub self_consistent: bool,
}

impl ConsistencyReport {
    pub fn max_mode_deviation(&self) -> f64 {
        self.mode_deviation.iter().copied().fold(0.0, f64::max)
    }
}

/// Largest entrywise gap between `u` and `mean`, flipping each row of
/// `mean` towards the matching row of `u` first.
fn aligned_deviation(u: &Matrix, mean: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for l in 0..u.rows() {
        let sign = if dot(u.row(l), mean.row(l)) < 0.0 {
            -1.0
        } else {
            1.0
        };
        for (a, b) in u.row(l).iter().zip(mean.row(l)) {
            worst = worst.max((a - sign * b).abs());
        }
    }
    worst
}

/// Checks whether `model` reproduces itself as the posterior mean of every
/// regression sub-problem, i.e. `m_u = u` for all three modes and `m_G = G`.
pub fn self_consistency_check(
    t: &Tensor3,
    model: &TuckerModel,
    alpha: f64,
    beta: f64,
    tol: f64,
) -> Result<ConsistencyReport> {
    let mut mode_deviation = [0.0; 3];
    for mode in Mode::ALL {
        let (mean, _) = posterior_stats(t, model, mode, alpha, beta)?;
        mode_deviation[mode.index()] = aligned_deviation(model.factor(mode), &mean);
    }
    let (m_g, _) = posterior_core_stats(t, model, alpha, beta)?;
    let core_deviation = model
        .core()
        .as_slice()
        .iter()
        .zip(m_g.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let self_consistent = mode_deviation.iter().all(|d| *d <= tol) && core_deviation <= tol;
    Ok(ConsistencyReport {
        mode_deviation,
        core_deviation,
        self_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{hooi, reconstruct, HooiOptions};
    use super::*;

    #[test]
    fn exact_rank_one_model() {
        let a = [0.6, 0.8];
        let b = [1.0 / 3f64.sqrt(); 3];
        let c = [0.0, 1.0];
        let mk = |v: &[f64]| Matrix::new(1, v.len(), v.to_vec()).unwrap();
        let model = TuckerModel::new(
            Tensor3::new((1, 1, 1), vec![5.0]).unwrap(),
            mk(&a),
            mk(&b),
            mk(&c),
        )
        .unwrap();
        let t = reconstruct(&model);
        let report = self_consistency_check(&t, &model, 0.0, 1.0, 1e-10).unwrap();
        assert!(report.self_consistent);
        assert!(report.max_mode_deviation() <= 1e-10);
        assert!(report.core_deviation <= 1e-10);
    }

    #[test]
    fn sign_flip_is_ignored() {
        let model = random_model((5, 4, 3), (2, 2, 1), 8);
        let t = reconstruct(&model);
        let mut flipped = model.clone();
        // flipping a factor row and the matching core slice leaves the tensor unchanged
        flipped
            .factor_mut(Mode::Two)
            .row_mut(1)
            .iter_mut()
            .for_each(|v| *v = -*v);
        let mut core = flipped.core().clone();
        for a in 0..2 {
            core.set(a, 1, 0, -core.get(a, 1, 0));
        }
        flipped.set_core(core);
        let report = self_consistency_check(&t, &flipped, 0.0, 1.0, 1e-8).unwrap();
        assert!(report.self_consistent, "{report:?}");
    }

    #[test]
    fn converged_hooi_is_consistent_and_perturbation_breaks_it() {
        let truth = random_model((8, 6, 5), (2, 2, 2), 9);
        let noise = random_tensor((8, 6, 5), 10);
        let t = Tensor3::from_fn((8, 6, 5), |i, j, k| {
            reconstruct(&truth).get(i, j, k) + 0.05 * noise.get(i, j, k)
        });
        let opts = HooiOptions {
            max_iter: 10_000,
            tol: 1e-14,
            factor_tol: None,
        };
        let (model, _) = hooi(&t, (2, 2, 2), opts).unwrap();
        let report = self_consistency_check(&t, &model, 0.0, 1.0, 1e-6).unwrap();
        assert!(report.self_consistent, "{report:?}");

        let mut rng = Lcg::new(11);
        let mut bad = model.clone();
        bad.factor_mut(Mode::One)
            .row_mut(0)
            .iter_mut()
            .for_each(|v| *v += 0.1 * rng.symmetric());
        let report = self_consistency_check(&t, &bad, 0.0, 1.0, 1e-6).unwrap();
        assert!(!report.self_consistent);
    }
}
