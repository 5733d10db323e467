//! Dense real third-order tensors and the T-product algebra.
//!
//! A [`Tensor3`] is an `n x m x s` array stored slice-major (frontal slice by
//! frontal slice), column-major within each slice, so slice extraction is
//! contiguous. The T-product of two tensors is the circular convolution of
//! their frontal slices along the third mode, equivalently
//! `fold(bcirc(A) * unfold(B))`.
//!
//! Two multiplication paths are kept on purpose:
//! * [`Tensor3::tprod_materialized`] builds the block circulant matrix and
//!   multiplies it against the unfolded operand — the reference path, used as
//!   the oracle in tests;
//! * [`Tensor3::tprod`] works per Fourier block (see [`crate::spectral`]) and
//!   is the production path.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::error::{Error, Result};
use crate::spectral;

/// Dense real third-order tensor, `n` rows x `m` columns x `s` frontal slices.
#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    m: usize,
    s: usize,
    data: Vec<f64>,
}

impl std::fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor3({}x{}x{})", self.n, self.m, self.s)
    }
}

impl Tensor3 {
    pub fn zeros(n: usize, m: usize, s: usize) -> Self {
        assert!(n > 0 && m > 0 && s > 0, "tensor dimensions must be positive");
        Tensor3 {
            n,
            m,
            s,
            data: vec![0.0; n * m * s],
        }
    }

    /// Builds a tensor from `f(i, j, k)`.
    pub fn from_fn(n: usize, m: usize, s: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(n, m, s);
        for k in 0..s {
            for j in 0..m {
                for i in 0..n {
                    t.data[k * n * m + j * n + i] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Wraps raw data already laid out slice-major, column-major within slice.
    pub fn from_data(n: usize, m: usize, s: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m * s || n == 0 || m == 0 || s == 0 {
            return Err(Error::DimensionMismatch {
                op: "from_data",
                details: format!("{} values for a {}x{}x{} tensor", data.len(), n, m, s),
            });
        }
        Ok(Tensor3 { n, m, s, data })
    }

    /// Builds a tensor from its frontal slices.
    pub fn from_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let s = slices.len();
        if s == 0 {
            return Err(Error::DimensionMismatch {
                op: "from_slices",
                details: "no slices supplied".into(),
            });
        }
        let (n, m) = slices[0].shape();
        let mut t = Tensor3::zeros(n, m, s);
        for (k, sl) in slices.iter().enumerate() {
            if sl.shape() != (n, m) {
                return Err(Error::DimensionMismatch {
                    op: "from_slices",
                    details: format!("slice {} is {:?}, expected {:?}", k, sl.shape(), (n, m)),
                });
            }
            t.data[k * n * m..(k + 1) * n * m].copy_from_slice(sl.as_slice());
        }
        Ok(t)
    }

    /// T-identity: first frontal slice is the identity matrix, the rest zero.
    pub fn identity(n: usize, s: usize) -> Self {
        let mut t = Tensor3::zeros(n, n, s);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.m, self.s)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[k * self.n * self.m + j * self.n + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[k * self.n * self.m + j * self.n + i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Frontal slice `k` as a borrowed column-major matrix view.
    pub fn slice(&self, k: usize) -> DMatrixView<'_, f64> {
        let nm = self.n * self.m;
        DMatrixView::from_slice(&self.data[k * nm..(k + 1) * nm], self.n, self.m)
    }

    pub fn slice_mut(&mut self, k: usize) -> DMatrixViewMut<'_, f64> {
        let nm = self.n * self.m;
        DMatrixViewMut::from_slice(&mut self.data[k * nm..(k + 1) * nm], self.n, self.m)
    }

    pub fn slice_owned(&self, k: usize) -> DMatrix<f64> {
        self.slice(k).into_owned()
    }

    /// The length-`s` mode-3 fiber at `(i, j)`.
    pub fn tube(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.s).map(|k| self.get(i, j, k)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, c: f64) -> Tensor3 {
        Tensor3 {
            n: self.n,
            m: self.m,
            s: self.s,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Tensor3, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor3> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                op,
                details: format!("{:?} vs {:?}", self.dims(), other.dims()),
            });
        }
        Ok(Tensor3 {
            n: self.n,
            m: self.m,
            s: self.s,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    /// T-transpose: every slice transposed, slices 2..s reversed in order.
    pub fn ttranspose(&self) -> Tensor3 {
        let mut t = Tensor3::zeros(self.m, self.n, self.s);
        for k in 0..self.s {
            let src = if k == 0 { 0 } else { self.s - k };
            let transposed = self.slice(src).transpose();
            t.slice_mut(k).copy_from(&transposed);
        }
        t
    }

    /// T-product via per-Fourier-block matrix products (production path).
    pub fn tprod(&self, other: &Tensor3) -> Result<Tensor3> {
        if self.m != other.n || self.s != other.s {
            return Err(Error::DimensionMismatch {
                op: "tprod",
                details: format!("{:?} * {:?}", self.dims(), other.dims()),
            });
        }
        let fa = spectral::to_fourier(self);
        let fb = spectral::to_fourier(other);
        let fc = fa.matmul(&fb)?;
        spectral::from_fourier(&fc)
    }

    /// T-product via the materialized block circulant (reference path).
    pub fn tprod_materialized(&self, other: &Tensor3) -> Result<Tensor3> {
        if self.m != other.n || self.s != other.s {
            return Err(Error::DimensionMismatch {
                op: "tprod_materialized",
                details: format!("{:?} * {:?}", self.dims(), other.dims()),
            });
        }
        let big = bcirc(self).matrix * unfold(other).matrix;
        fold(&big, self.n, other.m, self.s)
    }

    /// T-inverse, computed per Fourier block.
    pub fn tinv(&self) -> Result<Tensor3> {
        if self.n != self.m {
            return Err(Error::DimensionMismatch {
                op: "tinv",
                details: format!("tensor is {:?}, expected square slices", self.dims()),
            });
        }
        let f = spectral::to_fourier(self);
        let inv = f.block_map(|block, a| {
            let lu = a.clone().lu();
            let rcond = lu_rcond_estimate(&lu);
            if rcond < crate::SINGULARITY_RCOND {
                return Err(Error::SingularBlock { block, rcond });
            }
            lu.try_inverse().ok_or(Error::SingularBlock { block, rcond })
        })?;
        spectral::from_fourier(&inv)
    }

    /// Columns `range` of every frontal slice (a mode-2 section).
    pub fn lateral_cols(&self, range: std::ops::Range<usize>) -> Tensor3 {
        assert!(range.end <= self.m);
        let w = range.len();
        let mut t = Tensor3::zeros(self.n, w, self.s);
        for k in 0..self.s {
            t.slice_mut(k)
                .copy_from(&self.slice(k).columns(range.start, w));
        }
        t
    }

    /// Rows `range` of every frontal slice (a mode-1 section).
    pub fn row_section(&self, range: std::ops::Range<usize>) -> Tensor3 {
        assert!(range.end <= self.n);
        let h = range.len();
        let mut t = Tensor3::zeros(h, self.m, self.s);
        for k in 0..self.s {
            t.slice_mut(k).copy_from(&self.slice(k).rows(range.start, h));
        }
        t
    }
}

/// Relative Frobenius distance `|a - b| / max(|a|, tiny)`.
pub fn rel_err(a: &Tensor3, b: &Tensor3) -> f64 {
    debug_assert_eq!(a.dims(), b.dims());
    let mut num = 0.0;
    for (x, y) in a.data.iter().zip(&b.data) {
        num += (x - y) * (x - y);
    }
    num.sqrt() / a.norm().max(f64::MIN_POSITIVE)
}

/// Block circulant matrix of a tensor: `ns x ms`, block `(i, j)` is frontal
/// slice `(i - j) mod s`.
pub struct BlockCirculantMatrix {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub matrix: DMatrix<f64>,
}

pub fn bcirc(t: &Tensor3) -> BlockCirculantMatrix {
    let (n, m, s) = t.dims();
    let mut mat = DMatrix::<f64>::zeros(n * s, m * s);
    for bj in 0..s {
        for bi in 0..s {
            let k = (s + bi - bj) % s;
            mat.view_mut((bi * n, bj * m), (n, m)).copy_from(&t.slice(k));
        }
    }
    BlockCirculantMatrix { n, m, s, matrix: mat }
}

/// Unfolded tensor: frontal slices stacked vertically, `ns x h`.
pub struct UnfoldedMatrix {
    pub n: usize,
    pub h: usize,
    pub s: usize,
    pub matrix: DMatrix<f64>,
}

pub fn unfold(t: &Tensor3) -> UnfoldedMatrix {
    let (n, h, s) = t.dims();
    let mut mat = DMatrix::<f64>::zeros(n * s, h);
    for k in 0..s {
        mat.view_mut((k * n, 0), (n, h)).copy_from(&t.slice(k));
    }
    UnfoldedMatrix { n, h, s, matrix: mat }
}

/// Inverse of [`unfold`]: splits an `ns x h` matrix back into `s` slices.
pub fn fold(matrix: &DMatrix<f64>, n: usize, h: usize, s: usize) -> Result<Tensor3> {
    if matrix.nrows() != n * s || matrix.ncols() != h {
        return Err(Error::DimensionMismatch {
            op: "fold",
            details: format!(
                "matrix is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                n * s,
                h
            ),
        });
    }
    let mut t = Tensor3::zeros(n, h, s);
    for k in 0..s {
        t.slice_mut(k).copy_from(&matrix.view((k * n, 0), (n, h)));
    }
    Ok(t)
}

/// Concatenation along mode 2: `[A B]` with shapes `n x m1 x s`, `n x m2 x s`.
pub fn block_row(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    if a.n != b.n || a.s != b.s {
        return Err(Error::DimensionMismatch {
            op: "block_row",
            details: format!("{:?} | {:?}", a.dims(), b.dims()),
        });
    }
    let mut t = Tensor3::zeros(a.n, a.m + b.m, a.s);
    for k in 0..a.s {
        let mut sl = t.slice_mut(k);
        sl.view_mut((0, 0), (a.n, a.m)).copy_from(&a.slice(k));
        sl.view_mut((0, a.m), (b.n, b.m)).copy_from(&b.slice(k));
    }
    Ok(t)
}

/// Concatenation along mode 1: `[A; B]` with shapes `n1 x m x s`, `n2 x m x s`.
pub fn block_col(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    if a.m != b.m || a.s != b.s {
        return Err(Error::DimensionMismatch {
            op: "block_col",
            details: format!("{:?} ; {:?}", a.dims(), b.dims()),
        });
    }
    let mut t = Tensor3::zeros(a.n + b.n, a.m, a.s);
    for k in 0..a.s {
        let mut sl = t.slice_mut(k);
        sl.view_mut((0, 0), (a.n, a.m)).copy_from(&a.slice(k));
        sl.view_mut((a.n, 0), (b.n, b.m)).copy_from(&b.slice(k));
    }
    Ok(t)
}

/// Cheap reciprocal-condition proxy from LU diagonal magnitudes.
pub(crate) fn lu_rcond_estimate(lu: &nalgebra::LU<nalgebra::Complex<f64>, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for i in 0..u.nrows().min(u.ncols()) {
        let d = u[(i, i)].norm();
        min = min.min(d);
        max = max.max(d);
    }
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}
