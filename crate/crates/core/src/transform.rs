//! Invertible mode-3 transforms `L(A) = A x_3 Phi` with `Phi Phi^H = ell I`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

#[allow(unused_imports)] // float methods are inherent only when std is linked
use num_traits::Float;
use crate::error::{mismatch, Error, Result};
use crate::tensor::Tensor3;

/// Orthogonality tolerance (relative to `ell`) for the built-in transforms.
pub const BUILTIN_ORTHO_TOL: f64 = 1e-10;
/// Orthogonality tolerance (relative to `ell`) for user-supplied matrices.
pub const CUSTOM_ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Dft,
    Dct,
    Custom,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Dft => "dft",
            TransformKind::Dct => "dct",
            TransformKind::Custom => "custom",
        }
    }
}

impl core::str::FromStr for TransformKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dft" | "fft" => Ok(TransformKind::Dft),
            "dct" => Ok(TransformKind::Dct),
            "custom" => Ok(TransformKind::Custom),
            other => Err(Error::InvalidParameter {
                name: "transform",
                reason: format!("unknown transform `{other}` (expected dft or dct)"),
            }),
        }
    }
}

/// How transformed slice `k` of a real tensor relates to the other slices.
///
/// Row `k` of `Phi` determines it: a real row gives a real slice, and a row
/// that is the conjugate of an earlier row gives the conjugate of that slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceSymmetry {
    Real,
    /// Has a conjugate partner with a larger index.
    Leading,
    ConjugateOf(usize),
    /// No partner; real inputs can produce non-real spatial results.
    Unpaired,
}

#[derive(Debug, Clone)]
pub struct TransformSpec {
    kind: TransformKind,
    ell: f64,
    phi: DMatrix<Complex64>,
    // row-major copies of Re(Phi) and Im(Phi) for the mode-3 GEMMs
    phi_re: Vec<f64>,
    phi_im: Vec<f64>,
    symmetry: Vec<SliceSymmetry>,
}

impl TransformSpec {
    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn n3(&self) -> usize {
        self.phi.nrows()
    }

    pub fn phi(&self) -> &DMatrix<Complex64> {
        &self.phi
    }

    pub fn slice_symmetry(&self) -> &[SliceSymmetry] {
        &self.symmetry
    }

    /// True when every real tensor maps to a conjugate-closed set of slices,
    /// so products of transformed real tensors invert to real tensors.
    pub fn is_real_closed(&self) -> bool {
        !self.symmetry.iter().any(|s| matches!(s, SliceSymmetry::Unpaired))
    }

    /// Max-entry deviation of `Phi Phi^H` and `Phi^H Phi` from `ell I`.
    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.phi, self.ell)
    }

    pub fn forward(&self, a: &Tensor3) -> Result<SpectralTensor> {
        let (n1, n2, n3) = a.dims();
        self.check_n3(n3, "forward")?;
        let m = n1 * n2;
        let mut re = vec![0.0; m * n3];
        let mut im = vec![0.0; m * n3];
        // out(p, k) = sum_m A(p, m) Phi(k, m)
        unsafe {
            let src = a.as_slice().as_ptr();
            let mi = m as isize;
            let ni = n3 as isize;
            matrixmultiply::dgemm(
                m, n3, n3, 1.0, src, 1, mi, self.phi_re.as_ptr(), 1, ni, 0.0,
                re.as_mut_ptr(), 1, mi,
            );
            matrixmultiply::dgemm(
                m, n3, n3, 1.0, src, 1, mi, self.phi_im.as_ptr(), 1, ni, 0.0,
                im.as_mut_ptr(), 1, mi,
            );
        }
        let slices = (0..n3)
            .map(|k| {
                DMatrix::from_iterator(
                    n1,
                    n2,
                    re[k * m..(k + 1) * m]
                        .iter()
                        .zip(&im[k * m..(k + 1) * m])
                        .map(|(&r, &i)| Complex64::new(r, i)),
                )
            })
            .collect();
        Ok(SpectralTensor { n1, n2, slices })
    }

    /// Inverse transform with the realness check: fails when the spatial
    /// result carries an imaginary part above `1e-9 (1 + ||A||_F)`.
    pub fn inverse(&self, abar: &SpectralTensor) -> Result<Tensor3> {
        let (real, residue) = self.inverse_parts(abar, true)?;
        ensure_finite(&real)?;
        let limit = 1e-9 * (1.0 + real.fro_norm());
        if residue > limit {
            return Err(Error::ImaginaryResidueTooLarge { residue, limit });
        }
        Ok(real)
    }

    /// Inverse transform keeping only the real part, without checking the
    /// discarded imaginary part. Intended for slices produced by t-ops on real
    /// tensors under a real-closed transform.
    pub fn inverse_real(&self, abar: &SpectralTensor) -> Result<Tensor3> {
        let real = self.inverse_parts(abar, false)?.0;
        ensure_finite(&real)?;
        Ok(real)
    }

    /// Inverse used by the t-ops and solvers: the realness check is skipped
    /// when the transform is real-closed, and non-finite values pass through.
    pub(crate) fn inverse_for_ops(&self, abar: &SpectralTensor) -> Result<Tensor3> {
        if self.is_real_closed() {
            Ok(self.inverse_parts(abar, false)?.0)
        } else {
            self.inverse(abar)
        }
    }

    fn inverse_parts(&self, abar: &SpectralTensor, want_imag: bool) -> Result<(Tensor3, f64)> {
        let (n1, n2, n3) = abar.dims();
        self.check_n3(n3, "inverse")?;
        let m = n1 * n2;
        let mut are = Vec::with_capacity(m * n3);
        let mut aim = Vec::with_capacity(m * n3);
        for s in &abar.slices {
            for z in s.iter() {
                are.push(z.re);
                aim.push(z.im);
            }
        }
        let inv_ell = 1.0 / self.ell;
        let mut out = vec![0.0; m * n3];
        // Phi^{-1} = Phi^H / ell, so out(p, m) = sum_k Abar(p, k) conj(Phi(k, m)) / ell
        let mi = m as isize;
        let ni = n3 as isize;
        unsafe {
            matrixmultiply::dgemm(
                m, n3, n3, inv_ell, are.as_ptr(), 1, mi, self.phi_re.as_ptr(), ni, 1, 0.0,
                out.as_mut_ptr(), 1, mi,
            );
            matrixmultiply::dgemm(
                m, n3, n3, inv_ell, aim.as_ptr(), 1, mi, self.phi_im.as_ptr(), ni, 1, 1.0,
                out.as_mut_ptr(), 1, mi,
            );
        }
        let mut residue = 0.0;
        if want_imag {
            let mut imag = vec![0.0; m * n3];
            unsafe {
                matrixmultiply::dgemm(
                    m, n3, n3, inv_ell, aim.as_ptr(), 1, mi, self.phi_re.as_ptr(), ni, 1, 0.0,
                    imag.as_mut_ptr(), 1, mi,
                );
                matrixmultiply::dgemm(
                    m, n3, n3, -inv_ell, are.as_ptr(), 1, mi, self.phi_im.as_ptr(), ni, 1, 1.0,
                    imag.as_mut_ptr(), 1, mi,
                );
            }
            residue = imag.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
        }
        Ok((Tensor3::from_vec_unchecked(n1, n2, n3, out), residue))
    }

    /// Applies `f(k, slice_is_real)` to every slice, deriving the slices that
    /// are conjugates of earlier ones instead of recomputing them. Valid for
    /// spectra of real tensors.
    pub(crate) fn map_slices<T>(
        &self,
        mut f: impl FnMut(usize, bool) -> Result<T>,
        conj: impl Fn(&T) -> T,
    ) -> Result<Vec<T>> {
        let mut out: Vec<T> = Vec::with_capacity(self.n3());
        for k in 0..self.n3() {
            let v = match self.symmetry[k] {
                SliceSymmetry::Real => f(k, true)?,
                SliceSymmetry::ConjugateOf(p) => conj(&out[p]),
                _ => f(k, false)?,
            };
            out.push(v);
        }
        Ok(out)
    }

    pub(crate) fn check_n3(&self, n3: usize, op: &'static str) -> Result<()> {
        if n3 != self.n3() {
            return Err(mismatch(
                op,
                format!("tensor has n3 = {n3}, transform expects {}", self.n3()),
            ));
        }
        Ok(())
    }
}

fn ensure_finite(a: &Tensor3) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "abar",
            reason: "inverse transform produced non-finite entries".into(),
        })
    }
}

/// Builds the unnormalized DFT (`ell = n3`) or orthonormal DCT-II (`ell = 1`).
pub fn make_transform(kind: TransformKind, n3: usize) -> Result<TransformSpec> {
    if n3 == 0 {
        return Err(Error::InvalidDimension("n3 must be at least 1".into()));
    }
    let (phi, ell) = match kind {
        TransformKind::Dft => (dft_matrix(n3), n3 as f64),
        TransformKind::Dct => (dct_matrix(n3), 1.0),
        TransformKind::Custom => {
            return Err(Error::InvalidParameter {
                name: "kind",
                reason: "custom transforms need an explicit matrix".into(),
            })
        }
    };
    build(kind, phi, ell, BUILTIN_ORTHO_TOL)
}

/// Wraps a user matrix, inferring `ell` as the mean diagonal of `Phi Phi^H`.
pub fn make_custom_transform(phi: DMatrix<Complex64>) -> Result<TransformSpec> {
    if !phi.is_square() || phi.nrows() == 0 {
        return Err(Error::InvalidDimension(format!(
            "transform matrix must be square and non-empty, got {:?}",
            phi.shape()
        )));
    }
    let gram = &phi * phi.adjoint();
    let n = phi.nrows();
    let ell = (0..n).map(|i| gram[(i, i)].re).sum::<f64>() / n as f64;
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::NotOrthogonalUpToScale {
            deviation: f64::INFINITY,
            limit: 0.0,
        });
    }
    build(TransformKind::Custom, phi, ell, CUSTOM_ORTHO_TOL)
}

fn build(kind: TransformKind, mut phi: DMatrix<Complex64>, ell: f64, tol: f64) -> Result<TransformSpec> {
    let symmetry = classify_rows(&phi, ell);
    // Make real rows exactly real and partner rows exact conjugates, so that
    // the transform of a real tensor has exactly conjugate-closed slices.
    let n = phi.nrows();
    for k in 0..n {
        match symmetry[k] {
            SliceSymmetry::Real => (0..n).for_each(|m| phi[(k, m)].im = 0.0),
            SliceSymmetry::ConjugateOf(p) => (0..n).for_each(|m| phi[(k, m)] = phi[(p, m)].conj()),
            _ => {}
        }
    }
    let deviation = orthogonality_defect(&phi, ell);
    let limit = tol * ell;
    if !(deviation <= limit) {
        return Err(Error::NotOrthogonalUpToScale { deviation, limit });
    }
    let mut phi_re = Vec::with_capacity(n * n);
    let mut phi_im = Vec::with_capacity(n * n);
    for k in 0..n {
        for m in 0..n {
            phi_re.push(phi[(k, m)].re);
            phi_im.push(phi[(k, m)].im);
        }
    }
    Ok(TransformSpec {
        kind,
        ell,
        phi,
        phi_re,
        phi_im,
        symmetry,
    })
}

fn orthogonality_defect(phi: &DMatrix<Complex64>, ell: f64) -> f64 {
    let n = phi.nrows();
    let a = phi * phi.adjoint();
    let b = phi.adjoint() * phi;
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ell } else { 0.0 };
            dev = dev
                .max((a[(i, j)] - target).norm())
                .max((b[(i, j)] - target).norm());
        }
    }
    dev
}

fn classify_rows(phi: &DMatrix<Complex64>, ell: f64) -> Vec<SliceSymmetry> {
    let n = phi.nrows();
    let tol = 1e-12 * ell.sqrt().max(1.0);
    let mut out = vec![SliceSymmetry::Unpaired; n];
    for k in 0..n {
        if (0..n).all(|m| phi[(k, m)].im.abs() <= tol) {
            out[k] = SliceSymmetry::Real;
            continue;
        }
        if matches!(out[k], SliceSymmetry::ConjugateOf(_)) {
            continue;
        }
        if let Some(p) = (k + 1..n).find(|&p| {
            matches!(out[p], SliceSymmetry::Unpaired)
                && (0..n).all(|m| (phi[(p, m)] - phi[(k, m)].conj()).norm() <= tol)
        }) {
            out[k] = SliceSymmetry::Leading;
            out[p] = SliceSymmetry::ConjugateOf(k);
        }
    }
    out
}

fn dft_matrix(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |j, k| {
        // reduce the exponent first so large n keeps full precision
        let e = (j * k) % n;
        let theta = -2.0 * PI * e as f64 / n as f64;
        Complex64::new(theta.cos(), theta.sin())
    })
}

fn dct_matrix(n: usize) -> DMatrix<Complex64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, m| {
        let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        Complex64::new(c * (PI * (2 * m + 1) as f64 * k as f64 / (2.0 * nf)).cos(), 0.0)
    })
}

/// Transform-domain tensor: one complex `n1 x n2` matrix per frontal slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTensor {
    n1: usize,
    n2: usize,
    slices: Vec<DMatrix<Complex64>>,
}

impl SpectralTensor {
    pub fn from_slices(slices: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidDimension("no frontal slices".into()))?;
        let (n1, n2) = first.shape();
        if let Some(k) = slices.iter().position(|s| s.shape() != (n1, n2)) {
            return Err(mismatch(
                "SpectralTensor::from_slices",
                format!("slice {k} is {:?}, expected {:?}", slices[k].shape(), (n1, n2)),
            ));
        }
        Ok(Self { n1, n2, slices })
    }

    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Self {
            n1,
            n2,
            slices: vec![DMatrix::zeros(n1, n2); n3],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.slices.len())
    }

    pub fn slice(&self, k: usize) -> &DMatrix<Complex64> {
        &self.slices[k]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut DMatrix<Complex64> {
        &mut self.slices[k]
    }

    pub fn slices(&self) -> &[DMatrix<Complex64>] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<DMatrix<Complex64>> {
        self.slices
    }

    /// Facewise product `A △ B`.
    pub fn facewise_mul(&self, other: &SpectralTensor) -> Result<SpectralTensor> {
        if self.n2 != other.n1 || self.slices.len() != other.slices.len() {
            return Err(mismatch(
                "facewise_mul",
                format!("{:?} times {:?}", self.dims(), other.dims()),
            ));
        }
        Ok(SpectralTensor {
            n1: self.n1,
            n2: other.n2,
            slices: self
                .slices
                .iter()
                .zip(&other.slices)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// Facewise conjugate transpose.
    pub fn adjoint(&self) -> SpectralTensor {
        SpectralTensor {
            n1: self.n2,
            n2: self.n1,
            slices: self.slices.iter().map(|s| s.adjoint()).collect(),
        }
    }

    pub fn fro_norm(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| s.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// `<A, B> = sum_k tr(A_k^H B_k)`.
    pub fn inner(&self, other: &SpectralTensor) -> Complex64 {
        self.slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a.dotc(b))
            .sum()
    }
}
