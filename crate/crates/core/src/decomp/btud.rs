use super::consistency::self_consistency_check;
use super::posterior::{estimate_beta, posterior_summary, PosteriorStats};
use super::regression::{core_regression, mode_coefficients};
use super::{residual_norm, FitReport, TuckerModel};
use crate::error::{Error, Result};
use crate::linalg::orthonormalize_row_in_place;
use crate::tensor::{Mode, Tensor3};

/// Controls for [`btud_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtudOptions {
    pub max_sweeps: usize,
    /// A sweep that moves no factor entry by this much or more ends the fit.
    pub tol: f64,
    /// Threshold handed to the final self-consistency check.
    pub consistency_tol: f64,
}

impl Default for BtudOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            tol: 1e-8,
            consistency_tol: 1e-6,
        }
    }
}

/// Alternating-regression fit of a Tucker model.
///
/// Every sweep visits modes 1, 2, 3 in turn. Within a mode each component
/// row `l` is replaced by the regression coefficients of the fibers on the
/// current design matrix (pseudoinverse when `alpha == 0`, otherwise
/// `(ΦᵀΦ + αI)† Φᵀ`), orthogonalized against rows `0..l`, normalized, and
/// followed by a fresh core regression.
///
/// The returned posterior uses `beta` from [`estimate_beta`] on the final
/// model.
pub fn btud_fit(
    t: &Tensor3,
    init: &TuckerModel,
    alpha: f64,
    opts: BtudOptions,
) -> Result<(TuckerModel, PosteriorStats, FitReport)> {
    if t.dims() != init.dims() {
        return Err(Error::dim(format!(
            "tensor {:?} does not match model {:?}",
            t.dims(),
            init.dims()
        )));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::arg(format!(
            "alpha must be non-negative and finite, got {alpha}"
        )));
    }
    if opts.max_sweeps == 0 {
        return Err(Error::arg("max_sweeps must be at least 1"));
    }
    let ridge = (alpha > 0.0).then_some(alpha);
    let mut model = init.clone();
    let mut history = Vec::new();
    let mut converged = false;

    while history.len() < opts.max_sweeps {
        let before = model.factors().clone();
        for mode in Mode::ALL {
            for l in 0..model.factor(mode).rows() {
                let coef = mode_coefficients(t, &model, mode, ridge)?;
                let factor = model.factor_mut(mode);
                factor.row_mut(l).copy_from_slice(coef.row(l));
                orthonormalize_row_in_place(factor, l).map_err(|e| match e {
                    Error::DegenerateRow { .. } => Error::DegenerateComponent {
                        mode: mode.number(),
                        component: l,
                    },
                    other => other,
                })?;
                let [u1, u2, u3] = model.factors();
                let core = core_regression(t, u1, u2, u3)?;
                model.set_core(core);
            }
        }
        let r = residual_norm(t, &model);
        if !r.is_finite() {
            return Err(Error::NonFinite(format!(
                "residual after sweep {}",
                history.len() + 1
            )));
        }
        history.push(r);
        let change = before
            .iter()
            .zip(model.factors())
            .flat_map(|(a, b)| a.as_slice().iter().zip(b.as_slice()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let beta = estimate_beta(t, &model)?;
    let posterior = posterior_summary(t, &model, alpha, beta)?;
    let mut report = FitReport {
        sweeps: history.len(),
        residual_history: history,
        converged,
        self_consistent: false,
        max_mode_deviation: None,
    };
    let check = self_consistency_check(t, &model, alpha, beta, opts.consistency_tol)?;
    report.record_consistency(&check);
    Ok((model, posterior, report))
}
