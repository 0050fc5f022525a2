//! Gaussian posteriors of the four regression sub-problems.
//!
//! With the other blocks held at their current values, each factor fiber has
//! posterior `N(m, S)` with `S⁻¹ = αI + β ΦᵀΦ`. For `α = 0` the mean is the
//! least-squares solution `Φ† x` and `S` is reported as `(β ΦᵀΦ)†`.

use super::regression::{apply_to_fibers, design_matrix, project};
use super::{reconstruct, TuckerModel};
use crate::error::{Error, Result};
use crate::linalg::{pseudoinverse, symmetric_eigen};
use crate::tensor::{unfold, Matrix, Mode, Tensor3};

/// Returned by [`estimate_beta`] when the model fits exactly.
pub const BETA_CAP: f64 = 1e12;

/// Posterior means and covariances for all four sub-problems.
#[derive(Debug, Clone)]
pub struct PosteriorStats {
    /// `L_m x dim_m` posterior means, one column per fiber.
    pub mode_means: [Matrix; 3],
    /// `L_m x L_m`, shared by every fiber of the mode.
    pub mode_covs: [Matrix; 3],
    pub core_mean: Tensor3,
    /// `(L1 L2 L3)²`, indexed like the core's canonical layout.
    pub core_cov: Matrix,
    pub alpha: f64,
    pub beta: f64,
}

fn check_hyper(alpha: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::arg(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::arg(format!(
            "alpha must be non-negative and finite, got {alpha}"
        )));
    }
    Ok(())
}

fn check_dims(t: &Tensor3, model: &TuckerModel) -> Result<()> {
    if t.dims() != model.dims() {
        return Err(Error::dim(format!(
            "tensor {:?} does not match model {:?}",
            t.dims(),
            model.dims()
        )));
    }
    Ok(())
}

/// Posterior mean (`L x dim`) and covariance (`L x L`) of the mode-`mode` factor.
pub fn posterior_stats(
    t: &Tensor3,
    model: &TuckerModel,
    mode: Mode,
    alpha: f64,
    beta: f64,
) -> Result<(Matrix, Matrix)> {
    check_hyper(alpha, beta)?;
    check_dims(t, model)?;
    let phi = design_matrix(model, mode);
    let fibers = unfold(t, mode);
    let gram = phi.gram_cols();
    if alpha == 0.0 {
        let mean = apply_to_fibers(&pseudoinverse(&phi)?, &fibers);
        let cov = pseudoinverse(&gram.scale(beta))?;
        Ok((mean, cov))
    } else {
        let mut precision = gram.scale(beta);
        for l in 0..precision.rows() {
            precision[(l, l)] += alpha;
        }
        let cov = pseudoinverse(&precision)?;
        if (0..cov.rows()).any(|l| !(cov[(l, l)] > 0.0)) {
            return Err(Error::Internal(
                "alpha I + beta PhiᵀPhi is singular despite alpha > 0".into(),
            ));
        }
        let solver = cov.matmul(&phi.transpose())?.scale(beta);
        Ok((apply_to_fibers(&solver, &fibers), cov))
    }
}

/// Kronecker product laid out for the core's canonical (first index fastest)
/// vectorization: entry `(a1 + L1 (a2 + L2 a3), b1 + L1 (b2 + L2 b3))`.
fn kron3(a1: &Matrix, a2: &Matrix, a3: &Matrix) -> Matrix {
    let (l1, l2, l3) = (a1.rows(), a2.rows(), a3.rows());
    let n = l1 * l2 * l3;
    Matrix::from_fn(n, n, |r, c| {
        let (r1, r2, r3) = (r % l1, (r / l1) % l2, r / (l1 * l2));
        let (c1, c2, c3) = (c % l1, (c / l1) % l2, c / (l1 * l2));
        a1[(r1, c1)] * a2[(r2, c2)] * a3[(r3, c3)]
    })
}

/// Posterior of the core given the three factors.
///
/// `ΦᵀΦ` for the core regression factorizes as a Kronecker product of the
/// factor Gram matrices, which is used instead of building the
/// `(N M K) x (L1 L2 L3)` design matrix.
pub fn posterior_core_stats(
    t: &Tensor3,
    model: &TuckerModel,
    alpha: f64,
    beta: f64,
) -> Result<(Tensor3, Matrix)> {
    check_hyper(alpha, beta)?;
    check_dims(t, model)?;
    let [u1, u2, u3] = model.factors();
    let projected = project(t, u1, u2, u3)?;
    let grams = [u1.gram_rows(), u2.gram_rows(), u3.gram_rows()];
    if alpha == 0.0 {
        let p: Vec<Matrix> = grams.iter().map(pseudoinverse).collect::<Result<_>>()?;
        let mean = projected
            .mode_product(Mode::One, &p[0])?
            .mode_product(Mode::Two, &p[1])?
            .mode_product(Mode::Three, &p[2])?;
        let cov = kron3(&p[0], &p[1], &p[2]).scale(1.0 / beta);
        return Ok((mean, cov));
    }
    let mut vals = Vec::with_capacity(3);
    let mut vecs = Vec::with_capacity(3);
    for g in &grams {
        let (v, q) = symmetric_eigen(g)?;
        vals.push(v);
        vecs.push(q);
    }
    let (l1, l2, l3) = model.ranks();
    let weight =
        |a: usize, b: usize, c: usize| 1.0 / (alpha + beta * vals[0][a] * vals[1][b] * vals[2][c]);
    // rotate into the joint eigenbasis, scale, rotate back
    let rotated = projected
        .mode_product(Mode::One, &vecs[0].transpose())?
        .mode_product(Mode::Two, &vecs[1].transpose())?
        .mode_product(Mode::Three, &vecs[2].transpose())?;
    let scaled = Tensor3::from_fn((l1, l2, l3), |a, b, c| {
        beta * weight(a, b, c) * rotated.get(a, b, c)
    });
    let mean = scaled
        .mode_product(Mode::One, &vecs[0])?
        .mode_product(Mode::Two, &vecs[1])?
        .mode_product(Mode::Three, &vecs[2])?;
    let q = kron3(&vecs[0], &vecs[1], &vecs[2]);
    let n = l1 * l2 * l3;
    let d: Vec<f64> = (0..n)
        .map(|idx| weight(idx % l1, (idx / l1) % l2, idx / (l1 * l2)))
        .collect();
    let cov = Matrix::from_fn(n, n, |r, c| {
        (0..n).map(|s| q[(r, s)] * d[s] * q[(c, s)]).sum()
    });
    Ok((mean, cov))
}

/// Noise precision from the residual variance: `β = N M K / Σ residual²`,
/// capped at [`BETA_CAP`] (which is also the value for an exact fit).
pub fn estimate_beta(t: &Tensor3, model: &TuckerModel) -> Result<f64> {
    check_dims(t, model)?;
    let rec = reconstruct(model);
    let rss: f64 = t
        .as_slice()
        .iter()
        .zip(rec.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if rss == 0.0 {
        return Ok(BETA_CAP);
    }
    Ok((t.len() as f64 / rss).min(BETA_CAP))
}

/// All four posteriors at once.
pub fn posterior_summary(
    t: &Tensor3,
    model: &TuckerModel,
    alpha: f64,
    beta: f64,
) -> Result<PosteriorStats> {
    let (m1, s1) = posterior_stats(t, model, Mode::One, alpha, beta)?;
    let (m2, s2) = posterior_stats(t, model, Mode::Two, alpha, beta)?;
    let (m3, s3) = posterior_stats(t, model, Mode::Three, alpha, beta)?;
    let (core_mean, core_cov) = posterior_core_stats(t, model, alpha, beta)?;
    Ok(PosteriorStats {
        mode_means: [m1, m2, m3],
        mode_covs: [s1, s2, s3],
        core_mean,
        core_cov,
        alpha,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{reconstruct, TuckerModel};
    use super::*;
    use crate::tensor::dot;

    fn sign_aligned_diff(mean: &Matrix, u: &Matrix) -> f64 {
        let mut worst: f64 = 0.0;
        for l in 0..u.rows() {
            let s = if dot(mean.row(l), u.row(l)) < 0.0 {
                -1.0
            } else {
                1.0
            };
            for (a, b) in mean.row(l).iter().zip(u.row(l)) {
                worst = worst.max((s * a - b).abs());
            }
        }
        worst
    }

    #[test]
    fn exact_model_is_self_consistent() {
        let model = random_model((6, 5, 4), (3, 2, 2), 31);
        let t = reconstruct(&model);
        for mode in Mode::ALL {
            let (mean, cov) = posterior_stats(&t, &model, mode, 0.0, 2.0).unwrap();
            assert!(
                sign_aligned_diff(&mean, model.factor(mode)) < 1e-9,
                "mode {mode:?}"
            );
            for a in 0..cov.rows() {
                for b in 0..cov.cols() {
                    assert!((cov[(a, b)] - cov[(b, a)]).abs() < 1e-10);
                }
            }
        }
        let (m_g, s_g) = posterior_core_stats(&t, &model, 0.0, 4.0).unwrap();
        assert!(m_g.sub(model.core()).unwrap().frobenius_norm() < 1e-9);
        let n = s_g.rows();
        assert_eq!(n, 12);
        let expected = Matrix::identity(n).scale(0.25);
        assert!(s_g.max_abs_diff(&expected) < 1e-9);
    }

    #[test]
    fn ridge_limit_goes_to_zero() {
        let t = random_tensor((5, 4, 3), 3);
        let model = random_model((5, 4, 3), (2, 2, 1), 4);
        let (mean, _) = posterior_stats(&t, &model, Mode::Two, 1e12, 1.0).unwrap();
        assert!(mean.as_slice().iter().all(|v| v.abs() < 1e-9));
        let (m_g, _) = posterior_core_stats(&t, &model, 1e12, 1.0).unwrap();
        assert!(m_g.as_slice().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn single_column_least_squares() {
        // L1 = 1: the mean of fiber i is <φ, x_i> / <φ, φ>
        let t = random_tensor((4, 3, 2), 9);
        let model = random_model((4, 3, 2), (1, 1, 1), 10);
        let phi = design_matrix(&model, Mode::One).column(0);
        let (mean, cov) = posterior_stats(&t, &model, Mode::One, 0.0, 3.0).unwrap();
        let x = unfold(&t, Mode::One);
        let pp = dot(&phi, &phi);
        for i in 0..4 {
            let expected = dot(&phi, x.row(i)) / pp;
            assert!((mean[(0, i)] - expected).abs() < 1e-12);
        }
        assert!((cov[(0, 0)] - 1.0 / (3.0 * pp)).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_design_gives_scaled_identity_covariance() {
        // a diagonal unit core keeps Φ's columns orthonormal
        let mut model = random_model((6, 5, 4), (2, 2, 2), 12);
        let core = Tensor3::from_fn(
            (2, 2, 2),
            |a, b, c| if a == b && b == c { 1.0 } else { 0.0 },
        );
        model.set_core(core);
        let t = random_tensor((6, 5, 4), 13);
        for mode in Mode::ALL {
            let (_, cov) = posterior_stats(&t, &model, mode, 0.5, 2.0).unwrap();
            assert!(cov.max_abs_diff(&Matrix::identity(2).scale(1.0 / 2.5)) < 1e-9);
        }
        let (_, s_g) = posterior_core_stats(&t, &model, 0.5, 2.0).unwrap();
        assert!(s_g.max_abs_diff(&Matrix::identity(8).scale(1.0 / 2.5)) < 1e-9);
    }

    #[test]
    fn ridge_core_matches_dense_solve() {
        let t = random_tensor((4, 3, 3), 40);
        let mut rng = Lcg::new(41);
        let u1 = Matrix::from_fn(2, 4, |_, _| rng.symmetric());
        let u2 = Matrix::from_fn(2, 3, |_, _| rng.symmetric());
        let u3 = Matrix::from_fn(2, 3, |_, _| rng.symmetric());
        let core = Tensor3::zeros((2, 2, 2));
        let model = TuckerModel::new(core, u1.clone(), u2.clone(), u3.clone()).unwrap();
        let (alpha, beta) = (0.7, 1.3);
        let (m_g, s_g) = posterior_core_stats(&t, &model, alpha, beta).unwrap();
        // literal Φ
        let (n, m, k) = t.dims();
        let phi = Matrix::from_fn(n * m * k, 8, |row, col| {
            let (i, j, kk) = (row % n, (row / n) % m, row / (n * m));
            let (a, b, c) = (col % 2, (col / 2) % 2, col / 4);
            u1[(a, i)] * u2[(b, j)] * u3[(c, kk)]
        });
        let mut prec = phi.gram_cols().scale(beta);
        for l in 0..8 {
            prec[(l, l)] += alpha;
        }
        let s = pseudoinverse(&prec).unwrap();
        assert!(s.max_abs_diff(&s_g) < 1e-10);
        let rhs: Vec<f64> = (0..8).map(|c| dot(&phi.column(c), t.as_slice())).collect();
        for r in 0..8 {
            let expected: f64 = beta * (0..8).map(|c| s[(r, c)] * rhs[c]).sum::<f64>();
            assert!((m_g.as_slice()[r] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn beta_estimates() {
        let model = random_model((3, 3, 2), (1, 1, 1), 50);
        let rec = reconstruct(&model);
        assert_eq!(estimate_beta(&rec, &model).unwrap(), BETA_CAP);
        let mut flip = 1.0;
        let shifted = Tensor3::from_fn((3, 3, 2), |i, j, k| {
            flip = -flip;
            rec.get(i, j, k) + flip
        });
        assert!((estimate_beta(&shifted, &model).unwrap() - 1.0).abs() < 1e-12);

        let t = random_tensor((3, 3, 2), 51);
        let mut ss = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..2 {
                    let r = t.get(i, j, k) - rec.get(i, j, k);
                    ss += r * r;
                }
            }
        }
        let naive = 1.0 / (ss / 18.0);
        assert!((estimate_beta(&t, &model).unwrap() - naive).abs() <= 1e-12 * naive);
    }

    #[test]
    fn bad_hyperparameters() {
        let model = random_model((3, 3, 2), (1, 1, 1), 1);
        let t = reconstruct(&model);
        assert!(matches!(
            posterior_stats(&t, &model, Mode::One, 0.0, 0.0),
            Err(Error::Argument(_))
        ));
        assert!(posterior_stats(&t, &model, Mode::One, -1.0, 1.0).is_err());
        assert!(posterior_core_stats(&t, &model, 0.0, -2.0).is_err());
    }
}
