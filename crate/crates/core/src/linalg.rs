//! SVD, pseudoinverse and row orthonormalization.
//!
//! The SVD itself is delegated to `faer`; everything here normalizes its
//! output to one convention: singular values descending, and each left
//! singular vector flipped so its largest-magnitude entry is positive (ties go
//! to the lowest index). The right singular vector is flipped with it.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::tensor::{dot, Matrix};

/// Thin SVD `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows x r`, orthonormal columns.
    pub u: Matrix,
    /// Descending, non-negative.
    pub s: Vec<f64>,
    /// `cols x r`, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U diag(s) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let (rows, r) = self.u.shape();
        let cols = self.v.rows();
        Matrix::from_fn(rows, cols, |i, j| {
            (0..r)
                .map(|l| self.u[(i, l)] * self.s[l] * self.v[(j, l)])
                .sum()
        })
    }
}

fn view(a: &Matrix) -> MatRef<'_, f64> {
    MatRef::from_row_major_slice(a.as_slice(), a.rows(), a.cols())
}

fn columns(m: MatRef<'_, f64>, cols: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Thin SVD as `(U, s, V)` with `s` in the order `faer` returns it.
fn thin_svd(a: &Matrix) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    let dec = view(a)
        .thin_svd()
        .map_err(|e| Error::Internal(format!("SVD did not converge: {e:?}")))?;
    let s = dec.S().column_vector().iter().copied().collect();
    Ok((dec.U().to_owned(), s, dec.V().to_owned()))
}

/// Indices of `values`, largest first, lower index on ties.
fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]).then(x.cmp(&y)));
    order
}

/// Index of the largest-magnitude entry, lowest index on ties.
fn dominant_index(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (idx, v) in values.enumerate() {
        if v.abs() > best_abs {
            best = idx;
            best_abs = v.abs();
        }
    }
    best
}

fn check_finite(a: &Matrix) -> Result<()> {
    if a.as_slice().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("matrix passed to SVD".into()))
    }
}

/// Singular value decomposition, optionally truncated to `rank` components.
pub fn svd(a: &Matrix, rank: Option<usize>) -> Result<SvdResult> {
    if rank == Some(0) {
        return Err(Error::arg("svd rank must be positive"));
    }
    check_finite(a)?;
    let full = a.rows().min(a.cols());
    let keep = rank.map_or(full, |r| r.min(full));
    let (u, values, v) = thin_svd(a)?;
    let mut order = descending(&values);
    order.truncate(keep);

    let mut um = columns(u.as_ref(), &order);
    let mut vm = columns(v.as_ref(), &order);
    let s: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    for c in 0..keep {
        let pivot = dominant_index((0..um.rows()).map(|r| um[(r, c)]));
        if um[(pivot, c)] < 0.0 {
            for r in 0..um.rows() {
                um[(r, c)] = -um[(r, c)];
            }
            for r in 0..vm.rows() {
                vm[(r, c)] = -vm[(r, c)];
            }
        }
    }
    Ok(SvdResult { u: um, s, v: vm })
}

/// Top-`count` left singular vectors of `a`, returned as the rows of a
/// `count x a.rows()` matrix, under the crate sign convention.
pub fn leading_left_singular_vectors(a: &Matrix, count: usize) -> Result<Matrix> {
    if count == 0 || count > a.rows() {
        return Err(Error::arg(format!(
            "need between 1 and {} singular vectors, asked for {count}",
            a.rows()
        )));
    }
    check_finite(a)?;
    let rows = a.rows();
    let (u, values, _) = thin_svd(a)?;
    let order = descending(&values);

    let mut out = Matrix::zeros(count, rows);
    let available = order.len().min(count);
    for (l, &col) in order.iter().take(available).enumerate() {
        let pivot = dominant_index((0..rows).map(|r| u[(r, col)]));
        let sign = if u[(pivot, col)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..rows {
            out[(l, r)] = sign * u[(r, col)];
        }
    }
    // A wide matrix has fewer singular vectors than requested rows: complete
    // the basis so the factor stays row-orthonormal.
    if available < count {
        let mut next = 0;
        for l in available..count {
            loop {
                let row = out.row_mut(l);
                row.iter_mut().for_each(|v| *v = 0.0);
                row[next % rows] = 1.0;
                next += 1;
                if orthonormalize_in_place(&mut out, l).is_ok() {
                    break;
                }
                if next > 2 * rows {
                    return Err(Error::Internal(
                        "could not complete orthonormal basis".into(),
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Moore-Penrose pseudoinverse via SVD.
///
/// Singular values at or below `1e-12 * max(rows, cols) * s_max` are treated as zero.
pub fn pseudoinverse(a: &Matrix) -> Result<Matrix> {
    let dec = svd(a, None)?;
    let s_max = dec.s.first().copied().unwrap_or(0.0);
    let cutoff = 1e-12 * a.rows().max(a.cols()) as f64 * s_max;
    let mut out = Matrix::zeros(a.cols(), a.rows());
    for (l, &s) in dec.s.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for r in 0..a.cols() {
            let vr = dec.v[(r, l)] * inv;
            if vr == 0.0 {
                continue;
            }
            for c in 0..a.rows() {
                out[(r, c)] += vr * dec.u[(c, l)];
            }
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a symmetric matrix: eigenvalues (descending) and
/// the matching orthonormal eigenvectors as columns.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if a.rows() != a.cols() {
        return Err(Error::dim("symmetric_eigen needs a square matrix"));
    }
    check_finite(a)?;
    let eig = view(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Internal(format!("eigendecomposition did not converge: {e:?}")))?;
    let values: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    let order = descending(&values);
    let vals = order.iter().map(|&i| values[i]).collect();
    Ok((vals, columns(eig.U(), &order)))
}

fn orthonormalize_in_place(u: &mut Matrix, start_row: usize) -> Result<()> {
    let cols = u.cols();
    let mut row = u.row(start_row).to_vec();
    for earlier in 0..start_row {
        let q = u.row(earlier);
        let proj = dot(q, &row);
        for (r, &qv) in row.iter_mut().zip(q) {
            *r -= proj * qv;
        }
    }
    let norm = dot(&row, &row).sqrt();
    if !(norm >= 1e-12) {
        return Err(Error::DegenerateRow { row: start_row });
    }
    let dst = u.row_mut(start_row);
    for c in 0..cols {
        dst[c] = row[c] / norm;
    }
    Ok(())
}

/// Modified Gram-Schmidt step: makes row `start_row` orthogonal to every
/// earlier row, then scales it to unit length. Earlier rows are assumed
/// orthonormal and are left untouched; later rows are copied as-is.
pub fn orthonormalize_rows(u: &Matrix, start_row: usize) -> Result<Matrix> {
    if start_row >= u.rows() {
        return Err(Error::arg(format!(
            "start_row {start_row} out of range for {} rows",
            u.rows()
        )));
    }
    let mut out = u.clone();
    orthonormalize_in_place(&mut out, start_row)?;
    Ok(out)
}

pub(crate) fn orthonormalize_row_in_place(u: &mut Matrix, row: usize) -> Result<()> {
    orthonormalize_in_place(u, row)
}
