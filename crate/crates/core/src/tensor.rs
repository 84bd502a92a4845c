//! Dense real three-way arrays.
//!
//! Storage is frontal-slice major: slice `k` is outermost and each frontal
//! slice is stored column-major, so `A(:,:,k)` can be viewed directly as an
//! `n1 x n2` nalgebra matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DMatrixView};

#[allow(unused_imports)] // float methods are inherent only when std is linked
use num_traits::Float;
use crate::error::{mismatch, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Self {
            n1,
            n2,
            n3,
            data: vec![0.0; n1 * n2 * n3],
        }
    }

    /// Builds a tensor from a raw buffer in frontal-slice-major,
    /// column-major-within-slice order.
    pub fn from_vec(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(Error::InvalidDimension(format!(
                "tensor dims must be positive, got {n1}x{n2}x{n3}"
            )));
        }
        if data.len() != n1 * n2 * n3 {
            return Err(mismatch(
                "Tensor3::from_vec",
                format!("{} values for {n1}x{n2}x{n3}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "data",
                reason: "entries must be finite".into(),
            });
        }
        Ok(Self { n1, n2, n3, data })
    }

    /// Like `from_vec` but keeps non-finite entries, so that a diverging
    /// iteration can be detected by its caller instead of failing here.
    pub(crate) fn from_vec_unchecked(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n1 * n2 * n3);
        Self { n1, n2, n3, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn from_fn(n1: usize, n2: usize, n3: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n1, n2, n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    t.data[k * n1 * n2 + j * n1 + i] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Stacks `n1 x n2` matrices as frontal slices.
    pub fn from_frontal_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidDimension("no frontal slices".into()))?;
        let (n1, n2) = first.shape();
        let mut data = Vec::with_capacity(n1 * n2 * slices.len());
        for (k, s) in slices.iter().enumerate() {
            if s.shape() != (n1, n2) {
                return Err(mismatch(
                    "Tensor3::from_frontal_slices",
                    format!("slice {k} is {:?}, expected {:?}", s.shape(), (n1, n2)),
                ));
            }
            data.extend_from_slice(s.as_slice());
        }
        Self::from_vec(n1, n2, slices.len(), data)
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.n1 && j < self.n2 && k < self.n3);
        k * self.n1 * self.n2 + j * self.n1 + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn frontal_slice(&self, k: usize) -> DMatrixView<'_, f64> {
        let len = self.n1 * self.n2;
        DMatrixView::from_slice(&self.data[k * len..(k + 1) * len], self.n1, self.n2)
    }

    /// Mode-3 tube `A(i, j, :)`.
    pub fn tube(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.n3).map(|k| self.get(i, j, k)).collect()
    }

    /// Horizontal slice `A(i, :, :)` as an `1 x n2 x n3` tensor.
    pub fn horizontal_slice(&self, i: usize) -> Tensor3 {
        Tensor3::from_fn(1, self.n2, self.n3, |_, j, k| self.get(i, j, k))
    }

    /// Lateral slices `A(:, 0..cols, :)`.
    pub fn leading_columns(&self, cols: usize) -> Tensor3 {
        Tensor3::from_fn(self.n1, cols, self.n3, |i, j, k| self.get(i, j, k))
    }

    /// Leading `rows x cols` block of every frontal slice.
    pub fn leading_block(&self, rows: usize, cols: usize) -> Tensor3 {
        Tensor3::from_fn(rows, cols, self.n3, |i, j, k| self.get(i, j, k))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Tensor3 {
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Tensor3 {
        self.map(|v| c * v)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Tensor3) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn ensure_same_dims(&self, other: &Tensor3, op: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(mismatch(
                op,
                format!("{:?} vs {:?}", self.dims(), other.dims()),
            ));
        }
        Ok(())
    }

    /// `self + c * other`, the workhorse of every gradient step.
    pub fn axpy(&self, c: f64, other: &Tensor3) -> Tensor3 {
        debug_assert_eq!(self.dims(), other.dims());
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }
}

impl Add<&Tensor3> for &Tensor3 {
    type Output = Tensor3;
    fn add(self, rhs: &Tensor3) -> Tensor3 {
        self.axpy(1.0, rhs)
    }
}

impl Sub<&Tensor3> for &Tensor3 {
    type Output = Tensor3;
    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        self.axpy(-1.0, rhs)
    }
}

impl AddAssign<&Tensor3> for Tensor3 {
    fn add_assign(&mut self, rhs: &Tensor3) {
        debug_assert_eq!(self.dims(), rhs.dims());
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
    }
}

impl SubAssign<&Tensor3> for Tensor3 {
    fn sub_assign(&mut self, rhs: &Tensor3) {
        debug_assert_eq!(self.dims(), rhs.dims());
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= b);
    }
}

impl Mul<f64> for &Tensor3 {
    type Output = Tensor3;
    fn mul(self, c: f64) -> Tensor3 {
        self.scale(c)
    }
}

impl Neg for &Tensor3 {
    type Output = Tensor3;
    fn neg(self) -> Tensor3 {
        self.scale(-1.0)
    }
}
