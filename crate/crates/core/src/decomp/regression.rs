use super::TuckerModel;
use crate::error::{Error, Result};
use crate::linalg::pseudoinverse;
use crate::tensor::{dot, unfold, Matrix, Mode, Tensor3};

/// Factors deviating from row-orthonormality by more than this take the
/// general (pseudoinverse) core path.
const ORTHONORMAL_TOL: f64 = 1e-6;

/// Design matrix of the mode-`mode` regression.
///
/// Mode 1 gives the `(M K) x L1` matrix
/// `Φ[(j,k), l1] = sum_{l2,l3} G(l1,l2,l3) u2[l2,j] u3[l3,k]`, with rows in the
/// column order of `unfold(x, Mode::One)`; modes 2 and 3 are analogous.
pub fn design_matrix(model: &TuckerModel, mode: Mode) -> Matrix {
    let [u1, u2, u3] = model.factors();
    let core = model.core();
    let expanded = match mode {
        Mode::One => core
            .mode_product(Mode::Two, &u2.transpose())
            .and_then(|y| y.mode_product(Mode::Three, &u3.transpose())),
        Mode::Two => core
            .mode_product(Mode::One, &u1.transpose())
            .and_then(|y| y.mode_product(Mode::Three, &u3.transpose())),
        Mode::Three => core
            .mode_product(Mode::One, &u1.transpose())
            .and_then(|y| y.mode_product(Mode::Two, &u2.transpose())),
    }
    .expect("model shapes are validated on construction");
    unfold(&expanded, mode).transpose()
}

/// Regression coefficients for every fiber of `mode` as an `L x dim` matrix.
///
/// With `ridge = None` this is `Φ† x_fiber` for each fiber; with `Some(a)` it
/// is `(ΦᵀΦ + a I)† Φᵀ x_fiber`.
pub fn mode_coefficients(
    t: &Tensor3,
    model: &TuckerModel,
    mode: Mode,
    ridge: Option<f64>,
) -> Result<Matrix> {
    let phi = design_matrix(model, mode);
    let solver = match ridge {
        None => pseudoinverse(&phi)?,
        Some(a) => {
            let mut normal = phi.gram_cols();
            for l in 0..normal.rows() {
                normal[(l, l)] += a;
            }
            pseudoinverse(&normal)?.matmul(&phi.transpose())?
        }
    };
    Ok(apply_to_fibers(&solver, &unfold(t, mode)))
}

/// `solver * fibersᵀ` where `solver` is `L x p` and `fibers` is `dim x p`.
pub(crate) fn apply_to_fibers(solver: &Matrix, fibers: &Matrix) -> Matrix {
    let (l, p) = solver.shape();
    debug_assert_eq!(fibers.cols(), p);
    let dim = fibers.rows();
    let mut out = Matrix::zeros(l, dim);
    for i in 0..dim {
        let fiber = fibers.row(i);
        for r in 0..l {
            out[(r, i)] = dot(solver.row(r), fiber);
        }
    }
    out
}

fn check_factor_dims(t: &Tensor3, u: [&Matrix; 3]) -> Result<()> {
    let dims = t.dims();
    let need = [dims.0, dims.1, dims.2];
    for (m, (f, d)) in u.iter().zip(need).enumerate() {
        if f.cols() != d {
            return Err(Error::dim(format!(
                "factor {} has {} columns, tensor dimension is {}",
                m + 1,
                f.cols(),
                d
            )));
        }
    }
    Ok(())
}

/// Least-squares core for fixed factors: the pseudoinverse regression of
/// `vec(x)` on `Φ[(l1,l2,l3),(i,j,k)] = u1[l1,i] u2[l2,j] u3[l3,k]`.
///
/// For row-orthonormal factors that regression reduces to the projection
/// `x ×1 u1 ×2 u2 ×3 u3`. Otherwise the pseudoinverse is applied through the
/// Kronecker structure `(A ⊗ B)† = A† ⊗ B†` instead of materializing `Φ`.
pub fn core_regression(t: &Tensor3, u1: &Matrix, u2: &Matrix, u3: &Matrix) -> Result<Tensor3> {
    check_factor_dims(t, [u1, u2, u3])?;
    let projected = project(t, u1, u2, u3)?;
    let orthonormal = [u1, u2, u3]
        .iter()
        .all(|u| u.row_orthonormality_error() <= ORTHONORMAL_TOL);
    if orthonormal {
        return Ok(projected);
    }
    projected
        .mode_product(Mode::One, &pseudoinverse(&u1.gram_rows())?)?
        .mode_product(Mode::Two, &pseudoinverse(&u2.gram_rows())?)?
        .mode_product(Mode::Three, &pseudoinverse(&u3.gram_rows())?)
}

/// `x ×1 u1 ×2 u2 ×3 u3`, i.e. `Φᵀ vec(x)` reshaped to the core.
pub(crate) fn project(t: &Tensor3, u1: &Matrix, u2: &Matrix, u3: &Matrix) -> Result<Tensor3> {
    // contract the largest mode first
    let (n, m, k) = t.dims();
    if n >= m && n >= k {
        t.mode_product(Mode::One, u1)?
            .mode_product(Mode::Three, u3)?
            .mode_product(Mode::Two, u2)
    } else if m >= k {
        t.mode_product(Mode::Two, u2)?
            .mode_product(Mode::One, u1)?
            .mode_product(Mode::Three, u3)
    } else {
        t.mode_product(Mode::Three, u3)?
            .mode_product(Mode::One, u1)?
            .mode_product(Mode::Two, u2)
    }
}

/// Core regression with the full `(N M K) x (L1 L2 L3)` design matrix built
/// explicitly. Only practical for small tensors; kept as the literal
/// reference for [`core_regression`].
pub fn core_regression_dense(
    t: &Tensor3,
    u1: &Matrix,
    u2: &Matrix,
    u3: &Matrix,
) -> Result<Tensor3> {
    check_factor_dims(t, [u1, u2, u3])?;
    let (n, m, k) = t.dims();
    let (l1, l2, l3) = (u1.rows(), u2.rows(), u3.rows());
    let rows = n * m * k;
    let cols = l1 * l2 * l3;
    let phi = Matrix::from_fn(rows, cols, |row, col| {
        let (i, j, kk) = (row % n, (row / n) % m, row / (n * m));
        let (a, b, c) = (col % l1, (col / l1) % l2, col / (l1 * l2));
        u1[(a, i)] * u2[(b, j)] * u3[(c, kk)]
    });
    let pinv = pseudoinverse(&phi)?;
    let x = t.as_slice();
    let g: Vec<f64> = (0..cols).map(|r| dot(pinv.row(r), x)).collect();
    Ok(Tensor3::from_raw((l1, l2, l3), g))
}
