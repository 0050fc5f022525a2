use super::regression::{core_regression, project};
use super::{residual_norm, validate_ranks, FitReport, TuckerModel};
use crate::error::{Error, Result};
use crate::linalg::leading_left_singular_vectors;
use crate::tensor::{unfold, Matrix, Mode, Tensor3};

/// Stopping rule for [`hooi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HooiOptions {
    pub max_iter: usize,
    /// Stop once `|r_prev - r| / r_prev` drops below this, where `r` is the
    /// reconstruction error, or once the fit is exact to rounding.
    pub tol: f64,
    /// When set, additionally require that no factor entry moved by this
    /// much or more during the last iteration.
    pub factor_tol: Option<f64>,
}

impl Default for HooiOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            factor_tol: None,
        }
    }
}

fn check_finite(t: &Tensor3) -> Result<()> {
    if t.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input tensor".into()));
    }
    Ok(())
}

/// Truncated HOSVD: each factor holds the leading left singular vectors of
/// the corresponding unfolding.
pub fn hosvd_init(t: &Tensor3, ranks: (usize, usize, usize)) -> Result<TuckerModel> {
    validate_ranks(t.dims(), ranks)?;
    check_finite(t)?;
    let u1 = leading_left_singular_vectors(&unfold(t, Mode::One), ranks.0)?;
    let u2 = leading_left_singular_vectors(&unfold(t, Mode::Two), ranks.1)?;
    let u3 = leading_left_singular_vectors(&unfold(t, Mode::Three), ranks.2)?;
    let core = core_regression(t, &u1, &u2, &u3)?;
    TuckerModel::new(core, u1, u2, u3)
}

/// New factor for `mode`: leading left singular vectors of the tensor
/// contracted with the other two factors.
fn update_factor(t: &Tensor3, model: &TuckerModel, mode: Mode) -> Result<Matrix> {
    let (a, b) = mode.others();
    let contracted = t
        .mode_product(a, model.factor(a))?
        .mode_product(b, model.factor(b))?;
    leading_left_singular_vectors(&unfold(&contracted, mode), model.factor(mode).rows())
}

fn max_change(old: &[Matrix; 3], new: &[Matrix; 3]) -> f64 {
    old.iter()
        .zip(new)
        .flat_map(|(a, b)| a.as_slice().iter().zip(b.as_slice()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Higher-order orthogonal iteration started from [`hosvd_init`].
pub fn hooi(
    t: &Tensor3,
    ranks: (usize, usize, usize),
    opts: HooiOptions,
) -> Result<(TuckerModel, FitReport)> {
    if opts.max_iter == 0 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::arg(format!(
            "tol must be positive, got {}",
            opts.tol
        )));
    }
    if opts.factor_tol.is_some_and(|f| !(f > 0.0)) {
        return Err(Error::arg("factor_tol must be positive"));
    }
    let mut model = hosvd_init(t, ranks)?;
    // below this the fit is exact up to rounding and relative changes are noise
    let exact_floor = 1e-12 * t.frobenius_norm();
    let mut previous = residual_norm(t, &model);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let before = opts.factor_tol.map(|_| model.factors().clone());
        for mode in Mode::ALL {
            let u = update_factor(t, &model, mode)?;
            *model.factor_mut(mode) = u;
        }
        let [u1, u2, u3] = model.factors();
        let core = project(t, u1, u2, u3)?;
        model.set_core(core);
        let r = residual_norm(t, &model);
        if !r.is_finite() {
            return Err(Error::NonFinite(format!(
                "residual after iteration {}",
                history.len() + 1
            )));
        }
        history.push(r);
        let settled = match (&before, opts.factor_tol) {
            (Some(old), Some(limit)) => max_change(old, model.factors()) < limit,
            _ => true,
        };
        if r <= exact_floor || ((previous - r).abs() <= opts.tol * previous && settled) {
            converged = true;
            break;
        }
        previous = r;
    }
    let report = FitReport {
        sweeps: history.len(),
        residual_history: history,
        converged,
        self_consistent: false,
        max_mode_deviation: None,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::super::reconstruct;
    use super::super::testutil::*;
    use super::*;

    fn relative_error(a: &Tensor3, b: &Tensor3) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn separable_tensor_is_recovered() {
        let a = [1.0, -2.0, 0.5];
        let b = [3.0, 1.0];
        let c = [0.2, 0.4, -0.1, 1.0];
        let t = Tensor3::from_fn((3, 2, 4), |i, j, k| a[i] * b[j] * c[k]);
        let model = hosvd_init(&t, (1, 1, 1)).unwrap();
        assert!(relative_error(&reconstruct(&model), &t) < 1e-10);
    }

    #[test]
    fn full_rank_hosvd_is_exact() {
        let t = random_tensor((3, 3, 3), 2);
        let model = hosvd_init(&t, (3, 3, 3)).unwrap();
        assert!(relative_error(&reconstruct(&model), &t) < 1e-10);
    }

    #[test]
    fn hosvd_factors_are_orthonormal() {
        let t = random_tensor((5, 4, 3), 3);
        let model = hosvd_init(&t, (2, 2, 2)).unwrap();
        let [u1, u2, u3] = model.factors();
        for u in [u1, u2, u3] {
            for a in 0..u.rows() {
                for b in 0..u.rows() {
                    let d: f64 = u.row(a).iter().zip(u.row(b)).map(|(x, y)| x * y).sum();
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert!((d - expected).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn low_rank_input_fits_exactly() {
        let truth = random_model((7, 6, 5), (2, 3, 2), 4);
        let t = reconstruct(&truth);
        let (model, report) = hooi(&t, (2, 3, 2), HooiOptions::default()).unwrap();
        assert!(report.final_residual().unwrap() <= 1e-8);
        assert!(report.converged);
        assert!(model.orthonormality_error() < 1e-8);
    }

    #[test]
    fn residual_never_increases() {
        let t = random_tensor((10, 8, 6), 5);
        let (model, report) = hooi(&t, (3, 3, 3), HooiOptions::default()).unwrap();
        for w in report.residual_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-7, "{} -> {}", w[0], w[1]);
        }
        let hosvd = hosvd_init(&t, (3, 3, 3)).unwrap();
        assert!(residual_norm(&t, &model) <= residual_norm(&t, &hosvd) + 1e-12);
        assert!(model.orthonormality_error() < 1e-8);
    }

    #[test]
    fn rejects_bad_arguments() {
        let t = random_tensor((3, 3, 3), 6);
        assert!(matches!(hosvd_init(&t, (4, 1, 1)), Err(Error::Argument(_))));
        let opts = HooiOptions {
            max_iter: 0,
            ..HooiOptions::default()
        };
        assert!(hooi(&t, (1, 1, 1), opts).is_err());
        let opts = HooiOptions {
            max_iter: 5,
            tol: 0.0,
            factor_tol: None,
        };
        assert!(hooi(&t, (1, 1, 1), opts).is_err());
        let opts = HooiOptions {
            factor_tol: Some(-1.0),
            ..HooiOptions::default()
        };
        assert!(hooi(&t, (1, 1, 1), opts).is_err());
    }

    #[test]
    fn factor_tolerance_tightens_the_stop() {
        let t = random_tensor((10, 8, 6), 12);
        let (_, loose) = hooi(
            &t,
            (3, 3, 3),
            HooiOptions {
                tol: 1e-4,
                ..HooiOptions::default()
            },
        )
        .unwrap();
        let strict_opts = HooiOptions {
            max_iter: 10_000,
            tol: 1e-4,
            factor_tol: Some(1e-10),
        };
        let (_, strict) = hooi(&t, (3, 3, 3), strict_opts).unwrap();
        assert!(strict.converged);
        assert!(strict.sweeps >= loose.sweeps);
    }
}
