//! Dense order-3 tensors and the matrices built from them.
//!
//! Storage is first-index fastest: entry `(i, j, k)` of an `N x M x K`
//! tensor lives at `i + N * (j + M * k)`. Unfoldings are defined relative
//! to that layout:
//!
//! * mode 1: `N x (M K)`, column `j + M k`
//! * mode 2: `M x (N K)`, column `i + N k`
//! * mode 3: `K x (N M)`, column `i + N j`
//!
//! Design matrices in [`crate::decomp`] index their rows the same way, so
//! `unfold(x, m)` and `design_matrix(model, m)` line up without transposition.

mod io;
mod matrix;

pub use io::{fmt_f64, read_data, read_matrix, read_tensor, write_matrix, write_tensor, DataFile};
pub(crate) use matrix::dot;
pub use matrix::Matrix;

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};

use crate::error::{Error, Result};

/// One of the three tensor axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Zero-based axis index.
    pub fn index(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }

    /// 1-based mode number.
    pub fn number(self) -> usize {
        self.index() + 1
    }

    /// The two remaining modes in increasing order.
    pub fn others(self) -> (Mode, Mode) {
        match self {
            Mode::One => (Mode::Two, Mode::Three),
            Mode::Two => (Mode::One, Mode::Three),
            Mode::Three => (Mode::One, Mode::Two),
        }
    }
}

impl TryFrom<usize> for Mode {
    type Error = Error;

    /// Accepts the 1-based mode numbers 1, 2, 3.
    fn try_from(value: usize) -> Result<Self> {
        match value {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            other => Err(Error::arg(format!("mode must be 1, 2 or 3, got {other}"))),
        }
    }
}

/// Dense `N x M x K` real tensor.
#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        let (n, m, k) = dims;
        if n == 0 || m == 0 || k == 0 {
            return Err(Error::dim(format!("tensor dims {dims:?} must be positive")));
        }
        if values.len() != n * m * k {
            return Err(Error::dim(format!(
                "tensor {dims:?} needs {} values, got {}",
                n * m * k,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "tensor entry at linear index {pos}"
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        assert!(
            dims.0 > 0 && dims.1 > 0 && dims.2 > 0,
            "tensor dims must be positive"
        );
        Self {
            dims,
            values: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(dims);
        let (n, m, kk) = dims;
        let mut pos = 0;
        for k in 0..kk {
            for j in 0..m {
                for i in 0..n {
                    t.values[pos] = f(i, j, k);
                    pos += 1;
                }
            }
        }
        t
    }

    pub(crate) fn from_raw(dims: (usize, usize, usize), values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), dims.0 * dims.1 * dims.2);
        Self { dims, values }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn dim(&self, mode: Mode) -> usize {
        match mode {
            Mode::One => self.dims.0,
            Mode::Two => self.dims.1,
            Mode::Three => self.dims.2,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (n, m, _) = self.dims;
        i + n * (j + m * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.values[o] = v;
    }

    /// Values in canonical (first index fastest) order.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, rhs: &Tensor3) -> Result<Tensor3> {
        if self.dims != rhs.dims {
            return Err(Error::dim(format!(
                "tensor dims {:?} vs {:?}",
                self.dims, rhs.dims
            )));
        }
        Ok(Tensor3::from_raw(
            self.dims,
            self.values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    /// Mode-`mode` product with `a`: contracts axis `mode` (length `d`) against
    /// the columns of the `r x d` matrix `a`, replacing that axis by one of length `r`.
    pub fn mode_product(&self, mode: Mode, a: &Matrix) -> Result<Tensor3> {
        let (n, m, k) = self.dims;
        let d = self.dim(mode);
        if a.cols() != d {
            return Err(Error::dim(format!(
                "mode-{} product needs {} columns, matrix has {}",
                mode.number(),
                d,
                a.cols()
            )));
        }
        let r = a.rows();
        // Column-major views of the buffer make each product a single GEMM.
        let a_mat = MatRef::from_row_major_slice(a.as_slice(), r, d);
        let gemm = |dst: &mut [f64],
                    rows: usize,
                    cols: usize,
                    lhs: MatRef<'_, f64>,
                    rhs: MatRef<'_, f64>| {
            let dst = MatMut::from_column_major_slice_mut(dst, rows, cols);
            matmul(dst, Accum::Replace, lhs, rhs, 1.0, Par::Seq);
        };
        let out = match mode {
            Mode::One => {
                let mut out = vec![0.0; r * m * k];
                let x = MatRef::from_column_major_slice(&self.values, n, m * k);
                gemm(&mut out, r, m * k, a_mat, x);
                Tensor3::from_raw((r, m, k), out)
            }
            Mode::Two => {
                let mut out = vec![0.0; n * r * k];
                for (slab, dst) in self
                    .values
                    .chunks_exact(n * m)
                    .zip(out.chunks_exact_mut(n * r))
                {
                    let x = MatRef::from_column_major_slice(slab, n, m);
                    gemm(dst, n, r, x, a_mat.transpose());
                }
                Tensor3::from_raw((n, r, k), out)
            }
            Mode::Three => {
                let mut out = vec![0.0; n * m * r];
                let x = MatRef::from_column_major_slice(&self.values, n * m, k);
                gemm(&mut out, n * m, r, x, a_mat.transpose());
                Tensor3::from_raw((n, m, r), out)
            }
        };
        Ok(out)
    }
}

impl std::fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor3 {:?} ({} values)", self.dims, self.values.len())
    }
}

/// Mode-`mode` matricization; see the module docs for the column order.
pub fn unfold(t: &Tensor3, mode: Mode) -> Matrix {
    let (n, m, k) = t.dims;
    let x = &t.values;
    match mode {
        Mode::One => {
            let cols = m * k;
            let mut out = vec![0.0; n * cols];
            for (col, fiber) in x.chunks_exact(n).enumerate() {
                for (i, &v) in fiber.iter().enumerate() {
                    out[i * cols + col] = v;
                }
            }
            Matrix::from_raw(n, cols, out)
        }
        Mode::Two => {
            let cols = n * k;
            let mut out = vec![0.0; m * cols];
            for kk in 0..k {
                for j in 0..m {
                    let src = &x[n * (j + m * kk)..n * (j + m * kk) + n];
                    out[j * cols + n * kk..j * cols + n * kk + n].copy_from_slice(src);
                }
            }
            Matrix::from_raw(m, cols, out)
        }
        Mode::Three => Matrix::from_raw(k, n * m, x.clone()),
    }
}

/// Inverse of [`unfold`].
pub fn fold(mat: &Matrix, mode: Mode, dims: (usize, usize, usize)) -> Result<Tensor3> {
    let (n, m, k) = dims;
    if n == 0 || m == 0 || k == 0 {
        return Err(Error::dim(format!("tensor dims {dims:?} must be positive")));
    }
    let expected = match mode {
        Mode::One => (n, m * k),
        Mode::Two => (m, n * k),
        Mode::Three => (k, n * m),
    };
    if mat.shape() != expected {
        return Err(Error::dim(format!(
            "mode-{} fold of {:?} needs a {}x{} matrix, got {}x{}",
            mode.number(),
            dims,
            expected.0,
            expected.1,
            mat.rows(),
            mat.cols()
        )));
    }
    let src = mat.as_slice();
    let values = match mode {
        Mode::One => {
            let cols = m * k;
            let mut out = vec![0.0; n * cols];
            for (col, fiber) in out.chunks_exact_mut(n).enumerate() {
                for (i, v) in fiber.iter_mut().enumerate() {
                    *v = src[i * cols + col];
                }
            }
            out
        }
        Mode::Two => {
            let cols = n * k;
            let mut out = vec![0.0; n * m * k];
            for kk in 0..k {
                for j in 0..m {
                    out[n * (j + m * kk)..n * (j + m * kk) + n]
                        .copy_from_slice(&src[j * cols + n * kk..j * cols + n * kk + n]);
                }
            }
            out
        }
        Mode::Three => src.to_vec(),
    };
    Ok(Tensor3::from_raw(dims, values))
}

pub fn frobenius_norm(t: &Tensor3) -> f64 {
    t.frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counting(dims: (usize, usize, usize)) -> Tensor3 {
        // x_ijk = i + 10 j + 100 k with 1-based indices
        Tensor3::from_fn(dims, |i, j, k| {
            (i + 1) as f64 + 10.0 * (j + 1) as f64 + 100.0 * (k + 1) as f64
        })
    }

    #[test]
    fn unfold_scalar() {
        let t = Tensor3::new((1, 1, 1), vec![5.0]).unwrap();
        for mode in Mode::ALL {
            let u = unfold(&t, mode);
            assert_eq!(u.shape(), (1, 1));
            assert_eq!(u[(0, 0)], 5.0);
            assert_eq!(fold(&u, mode, (1, 1, 1)).unwrap(), t);
        }
    }

    #[test]
    fn unfold_matches_index_loop() {
        for dims in [(2, 2, 2), (2, 3, 4)] {
            let t = counting(dims);
            let (n, m, k) = dims;
            let u1 = unfold(&t, Mode::One);
            let u2 = unfold(&t, Mode::Two);
            let u3 = unfold(&t, Mode::Three);
            for i in 0..n {
                for j in 0..m {
                    for kk in 0..k {
                        let x = (i + 1) as f64 + 10.0 * (j + 1) as f64 + 100.0 * (kk + 1) as f64;
                        assert_eq!(u1[(i, j + m * kk)], x);
                        assert_eq!(u2[(j, i + n * kk)], x);
                        assert_eq!(u3[(kk, i + n * j)], x);
                    }
                }
            }
        }
        // row i = 1 of the 2x2x2 mode-1 unfolding: (j,k) = (1,1),(2,1),(1,2),(2,2)
        let u = unfold(&counting((2, 2, 2)), Mode::One);
        assert_eq!(u.row(0), &[111.0, 121.0, 211.0, 221.0]);
    }

    #[test]
    fn invalid_mode_and_fold_shape() {
        assert!(matches!(Mode::try_from(0), Err(Error::Argument(_))));
        assert!(matches!(Mode::try_from(4), Err(Error::Argument(_))));
        let m = Matrix::zeros(2, 3);
        assert!(matches!(
            fold(&m, Mode::One, (2, 2, 2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn norms() {
        assert_eq!(Tensor3::zeros((2, 3, 4)).frobenius_norm(), 0.0);
        assert_eq!(
            Tensor3::new((1, 1, 1), vec![-3.0])
                .unwrap()
                .frobenius_norm(),
            3.0
        );
        let t = counting((3, 2, 2));
        let direct: f64 = t.as_slice().iter().map(|v| v * v).sum();
        assert!((t.frobenius_norm().powi(2) - direct).abs() <= 1e-12 * direct);
        assert_eq!(unfold(&t, Mode::One).frobenius_norm(), t.frobenius_norm());
    }

    #[test]
    fn mode_product_matches_loops() {
        let t = Tensor3::from_fn((3, 4, 2), |i, j, k| {
            ((i * 7 + j * 3 + k * 5) % 11) as f64 - 4.0
        });
        for mode in Mode::ALL {
            let d = t.dim(mode);
            let a = Matrix::from_fn(2, d, |r, c| (r as f64 + 1.0) * 0.5 - c as f64 * 0.25);
            let y = t.mode_product(mode, &a).unwrap();
            let (n, m, k) = y.dims();
            for i in 0..n {
                for j in 0..m {
                    for kk in 0..k {
                        let mut s = 0.0;
                        for q in 0..d {
                            let (r, x) = match mode {
                                Mode::One => (i, t.get(q, j, kk)),
                                Mode::Two => (j, t.get(i, q, kk)),
                                Mode::Three => (kk, t.get(i, j, q)),
                            };
                            s += a[(r, q)] * x;
                        }
                        assert!((y.get(i, j, kk) - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn fold_unfold_round_trip_is_exact(
            n in 1usize..5, m in 1usize..5, k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let mut state = seed | 1;
            let t = Tensor3::from_fn((n, m, k), |_, _, _| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state as f64 / u64::MAX as f64) * 2.0 - 1.0
            });
            for mode in Mode::ALL {
                let back = fold(&unfold(&t, mode), mode, t.dims()).unwrap();
                prop_assert_eq!(back.as_slice(), t.as_slice());
            }
        }
    }
}
