//! Tucker decomposition solvers and their Bayesian reading.
//!
//! A [`TuckerModel`] approximates `x_ijk` by
//! `sum G(l1,l2,l3) u1[l1,i] u2[l2,j] u3[l3,k]`. Fixing all but one block of
//! parameters turns the fit into an ordinary linear regression, which is what
//! the posterior and [`btud_fit`] machinery builds on.

mod btud;
mod consistency;
mod hooi;
mod posterior;
mod regression;
mod serialize;

pub use btud::{btud_fit, BtudOptions};
pub use consistency::{self_consistency_check, ConsistencyReport};
pub use hooi::{hooi, hosvd_init, HooiOptions};
pub use posterior::{
    estimate_beta, posterior_core_stats, posterior_stats, posterior_summary, PosteriorStats,
    BETA_CAP,
};
pub use regression::{core_regression, core_regression_dense, design_matrix, mode_coefficients};
pub use serialize::{MatrixDoc, ModelDocument, ModelFile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Mode, Tensor3};

/// Core tensor plus one factor matrix per mode; factor `m` is `L_m x dim_m`
/// with components as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerModel {
    core: Tensor3,
    factors: [Matrix; 3],
}

impl TuckerModel {
    pub fn new(core: Tensor3, u1: Matrix, u2: Matrix, u3: Matrix) -> Result<Self> {
        let (l1, l2, l3) = core.dims();
        for (mode, (u, l)) in Mode::ALL.iter().zip([(&u1, l1), (&u2, l2), (&u3, l3)]) {
            if u.rows() != l {
                return Err(Error::dim(format!(
                    "factor {} has {} rows but core rank is {}",
                    mode.number(),
                    u.rows(),
                    l
                )));
            }
            if u.rows() > u.cols() {
                return Err(Error::arg(format!(
                    "rank {} exceeds dimension {} in mode {}",
                    u.rows(),
                    u.cols(),
                    mode.number()
                )));
            }
        }
        Ok(Self {
            core,
            factors: [u1, u2, u3],
        })
    }

    pub fn core(&self) -> &Tensor3 {
        &self.core
    }

    pub fn factor(&self, mode: Mode) -> &Matrix {
        &self.factors[mode.index()]
    }

    pub fn factors(&self) -> &[Matrix; 3] {
        &self.factors
    }

    pub(crate) fn factor_mut(&mut self, mode: Mode) -> &mut Matrix {
        &mut self.factors[mode.index()]
    }

    pub(crate) fn set_core(&mut self, core: Tensor3) {
        debug_assert_eq!(core.dims(), self.core.dims());
        self.core = core;
    }

    pub fn ranks(&self) -> (usize, usize, usize) {
        self.core.dims()
    }

    /// Dimensions of the tensor this model reconstructs.
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            self.factors[0].cols(),
            self.factors[1].cols(),
            self.factors[2].cols(),
        )
    }

    /// Largest deviation of any factor from row-orthonormality.
    pub fn orthonormality_error(&self) -> f64 {
        self.factors
            .iter()
            .map(Matrix::row_orthonormality_error)
            .fold(0.0, f64::max)
    }

    pub fn reconstruct(&self) -> Tensor3 {
        reconstruct(self)
    }
}

/// `sum G(l1,l2,l3) u1[l1,i] u2[l2,j] u3[l3,k]` for every `(i,j,k)`.
pub fn reconstruct(model: &TuckerModel) -> Tensor3 {
    let [u1, u2, u3] = &model.factors;
    // expanding the smallest modes first keeps intermediates small
    model
        .core
        .mode_product(Mode::Three, &u3.transpose())
        .and_then(|y| y.mode_product(Mode::Two, &u2.transpose()))
        .and_then(|y| y.mode_product(Mode::One, &u1.transpose()))
        .expect("model shapes are validated on construction")
}

/// Checks ranks against tensor dimensions.
pub fn validate_ranks(dims: (usize, usize, usize), ranks: (usize, usize, usize)) -> Result<()> {
    let pairs = [(ranks.0, dims.0), (ranks.1, dims.1), (ranks.2, dims.2)];
    for (mode, (l, d)) in pairs.into_iter().enumerate() {
        if l == 0 || l > d {
            return Err(Error::arg(format!(
                "rank {l} for mode {} must lie in 1..={d}",
                mode + 1
            )));
        }
    }
    Ok(())
}

/// Convergence bookkeeping shared by the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// HOOI iterations or Algorithm-1 sweeps performed.
    pub sweeps: usize,
    /// Reconstruction Frobenius error after each sweep.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub self_consistent: bool,
    /// max over modes of `max |u - m_u|`; unset until a consistency check ran.
    pub max_mode_deviation: Option<f64>,
}

impl FitReport {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }

    pub(crate) fn record_consistency(&mut self, report: &ConsistencyReport) {
        self.self_consistent = report.self_consistent;
        self.max_mode_deviation = Some(report.max_mode_deviation());
    }
}

pub(crate) fn residual_norm(t: &Tensor3, model: &TuckerModel) -> f64 {
    let rec = reconstruct(model);
    t.as_slice()
        .iter()
        .zip(rec.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn rank_one_constant_factors() {
        let dims = (3usize, 4usize, 5usize);
        let unit = |n: usize| Matrix::from_fn(1, n, |_, _| 1.0 / (n as f64).sqrt());
        let model = TuckerModel::new(
            Tensor3::new((1, 1, 1), vec![2.0]).unwrap(),
            unit(dims.0),
            unit(dims.1),
            unit(dims.2),
        )
        .unwrap();
        let expected = 2.0 / ((dims.0 * dims.1 * dims.2) as f64).sqrt();
        for v in reconstruct(&model).as_slice() {
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruct_matches_naive_sum() {
        let model = random_model((4, 3, 2), (2, 2, 2), 17);
        let rec = reconstruct(&model);
        let [u1, u2, u3] = model.factors();
        let g = model.core();
        for i in 0..4 {
            for j in 0..3 {
                for k in 0..2 {
                    let mut s = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for c in 0..2 {
                                s += g.get(a, b, c) * u1[(a, i)] * u2[(b, j)] * u3[(c, k)];
                            }
                        }
                    }
                    let got = rec.get(i, j, k);
                    assert!((got - s).abs() <= 1e-12 * s.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let core = Tensor3::zeros((2, 1, 1));
        let u = Matrix::from_fn(1, 3, |_, _| 1.0);
        assert!(TuckerModel::new(core.clone(), u.clone(), u.clone(), u.clone()).is_err());
        let wide = Matrix::from_fn(2, 1, |_, _| 1.0);
        assert!(TuckerModel::new(core, wide, u.clone(), u).is_err());
        assert!(validate_ranks((3, 3, 3), (4, 1, 1)).is_err());
        assert!(validate_ranks((3, 3, 3), (0, 1, 1)).is_err());
        assert!(validate_ranks((3, 3, 3), (3, 3, 3)).is_ok());
    }
}
