use serde::{Deserialize, Serialize};

use super::pvalues::{btud_pvalues, td_pvalues};
use super::sigma::{optimize_sigma, SigmaFit, SigmaOptions};
use super::{select_features, SelectionResult};
use crate::decomp::{estimate_beta, posterior_stats, TuckerModel};
use crate::error::{Error, Result};
use crate::linalg::{svd, SvdResult};
use crate::tensor::{Matrix, Mode, Tensor3};

/// How [`svd_select`] turns singular vectors into P-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvdMethod {
    /// Left singular vectors scaled by an optimized σ.
    Td,
    /// Posterior means and variances of the row loadings.
    Btud,
}

#[derive(Debug, Clone)]
pub struct SvdSelection {
    pub result: SelectionResult,
    /// Decomposition truncated to the largest requested component.
    pub svd: SvdResult,
    pub sigma: Option<SigmaFit>,
    pub beta: Option<f64>,
}

/// Feature selection on a matrix whose rows are the features.
///
/// With [`SvdMethod::Btud`] the chosen components form the model
/// `x_ij ≈ Σ λ_l u_li v_lj`, read as an `N x M x 1` Tucker model with a
/// diagonal core; the row loadings then get the usual posterior with `α = 0`
/// and `β` from the residual.
pub fn svd_select(
    x: &Matrix,
    components: &[usize],
    method: SvdMethod,
    threshold: f64,
    sigma_opts: &SigmaOptions,
) -> Result<SvdSelection> {
    let limit = x.rows().min(x.cols());
    let Some(&top) = components.iter().max() else {
        return Err(Error::arg("at least one component is required"));
    };
    if top >= limit {
        return Err(Error::arg(format!(
            "component {} exceeds the matrix rank bound {limit}",
            top + 1
        )));
    }
    let dec = svd(x, Some(top + 1))?;
    let l = components.len();
    let u = Matrix::from_fn(l, x.rows(), |r, i| dec.u[(i, components[r])]);
    match method {
        SvdMethod::Td => {
            let all: Vec<usize> = (0..l).collect();
            let fit = optimize_sigma(&u, &all, sigma_opts)?;
            let stats = td_pvalues(&u, &fit.sigma, &all)?;
            Ok(SvdSelection {
                result: select_features(stats, threshold)?,
                svd: dec,
                sigma: Some(fit),
                beta: None,
            })
        }
        SvdMethod::Btud => {
            let (n, m) = x.shape();
            let t = Tensor3::from_fn((n, m, 1), |i, j, _| x[(i, j)]);
            let v = Matrix::from_fn(l, m, |r, j| dec.v[(j, components[r])]);
            let core = Tensor3::from_fn(
                (l, l, 1),
                |a, b, _| {
                    if a == b {
                        dec.s[components[a]]
                    } else {
                        0.0
                    }
                },
            );
            let one = Matrix::identity(1);
            let model = TuckerModel::new(core, u, v, one)?;
            let beta = estimate_beta(&t, &model)?;
            let (mean, cov) = posterior_stats(&t, &model, Mode::One, 0.0, beta)?;
            let all: Vec<usize> = (0..l).collect();
            let stats = btud_pvalues(&mean, &cov, &all)?;
            Ok(SvdSelection {
                result: select_features(stats, threshold)?,
                svd: dec,
                sigma: None,
                beta: Some(beta),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    fn noise(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| crate::datagen::standard_normal(&mut rng))
    }

    #[test]
    fn dominant_row_is_selected() {
        let mut x = noise(200, 30, 1);
        for j in 0..30 {
            x[(0, j)] = 50.0;
        }
        for method in [SvdMethod::Td, SvdMethod::Btud] {
            let sel = svd_select(&x, &[0], method, 0.05, &SigmaOptions::default()).unwrap();
            assert!(sel.result.selected[0], "{method:?}");
        }
    }

    #[test]
    fn btud_mean_equals_scaled_singular_vector() {
        // with orthonormal v and a diagonal core the least-squares loading is u itself
        let x = noise(40, 10, 2);
        let sel = svd_select(&x, &[0, 1], SvdMethod::Btud, 0.05, &SigmaOptions::default()).unwrap();
        let beta = sel.beta.unwrap();
        let s = &sel.svd.s;
        for i in 0..40 {
            let expected = beta
                * (s[0] * s[0] * sel.svd.u[(i, 0)].powi(2)
                    + s[1] * s[1] * sel.svd.u[(i, 1)].powi(2));
            assert!((sel.result.statistic[i] - expected).abs() < 1e-8 * expected.max(1.0));
        }
    }

    #[test]
    fn rejects_bad_components() {
        let x = noise(5, 3, 3);
        let opts = SigmaOptions::default();
        assert!(svd_select(&x, &[], SvdMethod::Td, 0.05, &opts).is_err());
        assert!(svd_select(&x, &[3], SvdMethod::Btud, 0.05, &opts).is_err());
    }
}
