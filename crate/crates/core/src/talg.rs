//! Tensor algebra under a transform: t-product, conjugate transpose,
//! identity, t-SVD, inverse, square root, norms, and ranks.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

#[allow(unused_imports)] // float methods are inherent only when std is linked
use num_traits::Float;
use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{self, SliceSvd};
use crate::tensor::Tensor3;
use crate::transform::{SpectralTensor, TransformSpec};

/// Relative floor below which singular values count as zero.
pub const RANK_FLOOR: f64 = 1e-12;

pub fn t_product(a: &Tensor3, b: &Tensor3, spec: &TransformSpec) -> Result<Tensor3> {
    let (n1, n2, n3) = a.dims();
    let (m1, _, m3) = b.dims();
    if n2 != m1 || n3 != m3 {
        return Err(mismatch("t_product", format!("{:?} * {:?}", a.dims(), b.dims())));
    }
    let prod = spec.forward(a)?.facewise_mul(&spec.forward(b)?)?;
    debug_assert_eq!(prod.dims().0, n1);
    spec.inverse_for_ops(&prod)
}

pub fn conj_transpose(a: &Tensor3, spec: &TransformSpec) -> Result<Tensor3> {
    spec.inverse_for_ops(&spec.forward(a)?.adjoint())
}

/// Tensor whose transformed frontal slices are all `I_n`.
pub fn identity_tensor(n: usize, spec: &TransformSpec) -> Result<Tensor3> {
    if n == 0 {
        return Err(Error::InvalidDimension("identity size must be at least 1".into()));
    }
    let eye = DMatrix::<Complex64>::identity(n, n);
    let slices = (0..spec.n3()).map(|_| eye.clone()).collect();
    spec.inverse(&SpectralTensor::from_slices(slices)?)
}

/// `U * G * V^H` with `U`, `V` orthogonal and `G` f-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TSVDFactors {
    pub u: Tensor3,
    pub g: Tensor3,
    pub v: Tensor3,
}

impl TSVDFactors {
    /// Number of singular tubes kept.
    pub fn rank(&self) -> usize {
        self.g.dims().0
    }

    pub fn reconstruct(&self, spec: &TransformSpec) -> Result<Tensor3> {
        let ug = t_product(&self.u, &self.g, spec)?;
        t_product(&ug, &conj_transpose(&self.v, spec)?, spec)
    }

    /// Transformed singular values, `sigmas[k][i] = Gbar(i, i, k)`.
    pub fn transformed_singular_values(&self, spec: &TransformSpec) -> Result<Vec<Vec<f64>>> {
        let gbar = spec.forward(&self.g)?;
        Ok(gbar
            .slices()
            .iter()
            .map(|s| (0..self.rank()).map(|i| s[(i, i)].re).collect())
            .collect())
    }
}

/// Per-slice SVDs of a real tensor's spectrum.
pub(crate) fn spectral_svd(abar: &SpectralTensor, spec: &TransformSpec) -> Result<Vec<SliceSvd>> {
    spec.map_slices(
        |k, real| linalg::svd(abar.slice(k), real).ok_or(Error::SvdFailure { slice: k }),
        SliceSvd::conj,
    )
}

/// Assembles spatial `(U, G, V)` from per-slice SVDs, keeping `r` tubes.
pub(crate) fn assemble_factors(
    svds: &[SliceSvd],
    r: usize,
    spec: &TransformSpec,
) -> Result<TSVDFactors> {
    let ubar = svds.iter().map(|f| f.u.columns(0, r).into_owned()).collect();
    let vbar = svds.iter().map(|f| f.v.columns(0, r).into_owned()).collect();
    let gbar = svds
        .iter()
        .map(|f| DMatrix::from_fn(r, r, |i, j| if i == j { Complex64::new(f.s[i], 0.0) } else { Complex64::new(0.0, 0.0) }))
        .collect();
    Ok(TSVDFactors {
        u: spec.inverse_for_ops(&SpectralTensor::from_slices(ubar)?)?,
        g: spec.inverse_for_ops(&SpectralTensor::from_slices(gbar)?)?,
        v: spec.inverse_for_ops(&SpectralTensor::from_slices(vbar)?)?,
    })
}

/// Full thin t-SVD with `min(n1, n2)` singular tubes.
pub fn t_svd(a: &Tensor3, spec: &TransformSpec) -> Result<TSVDFactors> {
    let (n1, n2, _) = a.dims();
    let svds = spectral_svd(&spec.forward(a)?, spec)?;
    assemble_factors(&svds, n1.min(n2), spec)
}

/// Keeps the leading `r` singular tubes.
pub fn truncate(f: &TSVDFactors, r: usize) -> Result<TSVDFactors> {
    let max = f.rank();
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    Ok(TSVDFactors {
        u: f.u.leading_columns(r),
        g: f.g.leading_block(r, r),
        v: f.v.leading_columns(r),
    })
}

fn ensure_square(a: &Tensor3, op: &'static str) -> Result<()> {
    let (n1, n2, _) = a.dims();
    if n1 != n2 {
        return Err(mismatch(op, format!("expected square frontal slices, got {n1}x{n2}")));
    }
    Ok(())
}

/// Spectrum of the inverse; `SingularSlice(k)` names the first singular slice.
pub(crate) fn spectral_inverse(abar: &SpectralTensor, spec: &TransformSpec) -> Result<SpectralTensor> {
    let svds = spectral_svd(abar, spec)?;
    // relative to the whole tensor: a slice of pure rounding noise is
    // well conditioned on its own
    let smax = svds.iter().filter_map(|f| f.s.first().copied()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(svds.len());
    for (k, f) in svds.iter().enumerate() {
        let smin = f.s.last().copied().unwrap_or(0.0);
        if !(smin > RANK_FLOOR * smax) {
            return Err(Error::SingularSlice(k));
        }
        out.push(linalg::inverse_from_svd(f));
    }
    SpectralTensor::from_slices(out)
}

pub fn t_inverse(a: &Tensor3, spec: &TransformSpec) -> Result<Tensor3> {
    ensure_square(a, "t_inverse")?;
    spec.inverse_for_ops(&spectral_inverse(&spec.forward(a)?, spec)?)
}

/// Spectrum of the principal square root of a slice-wise Hermitian PSD tensor.
pub(crate) fn spectral_sqrt(abar: &SpectralTensor, spec: &TransformSpec) -> Result<SpectralTensor> {
    let slices = spec.map_slices(
        |k, real| {
            let s = abar.slice(k);
            let scale = s.iter().fold(0.0, |m: f64, z| m.max(z.norm()));
            let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
            if linalg::max_entry_dev(s, &s.adjoint()) > tol {
                return Err(Error::NotPsdSlice(k));
            }
            let (mut d, v) = linalg::hermitian_eigen(s, real).ok_or(Error::NotPsdSlice(k))?;
            if d.iter().any(|&x| x < -tol) {
                return Err(Error::NotPsdSlice(k));
            }
            d.iter_mut().for_each(|x| *x = x.max(0.0).sqrt());
            Ok(linalg::from_eigen(&d, &v))
        },
        |m| m.map(|z| z.conj()),
    )?;
    SpectralTensor::from_slices(slices)
}

pub fn t_sqrt(a: &Tensor3, spec: &TransformSpec) -> Result<Tensor3> {
    ensure_square(a, "t_sqrt")?;
    spec.inverse_for_ops(&spectral_sqrt(&spec.forward(a)?, spec)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    Fro,
    Spectral,
    Nuclear,
    Inf,
    L1,
    /// `max_i ||A(i,:,:)||_F`
    TwoInf,
    /// Largest horizontal- or lateral-slice Frobenius norm.
    InfTwo,
    /// `max_{i,k} ||A(i,:,k)||_2`
    TwoTwoInf,
}

impl NormKind {
    pub const ALL: [NormKind; 8] = [
        NormKind::Fro,
        NormKind::Spectral,
        NormKind::Nuclear,
        NormKind::Inf,
        NormKind::L1,
        NormKind::TwoInf,
        NormKind::InfTwo,
        NormKind::TwoTwoInf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Fro => "fro",
            NormKind::Spectral => "spectral",
            NormKind::Nuclear => "nuclear",
            NormKind::Inf => "inf",
            NormKind::L1 => "l1",
            NormKind::TwoInf => "two_inf",
            NormKind::InfTwo => "inf_two",
            NormKind::TwoTwoInf => "two_two_inf",
        }
    }
}

impl core::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NormKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

fn slice_singular_values(a: &Tensor3, spec: &TransformSpec) -> Result<Vec<Vec<f64>>> {
    let abar = spec.forward(a)?;
    spec.map_slices(
        |k, real| linalg::singular_values(abar.slice(k), real).ok_or(Error::SvdFailure { slice: k }),
        Clone::clone,
    )
}

/// `||A(i,:,:)||_F` for every `i`.
pub(crate) fn row_norms(a: &Tensor3) -> Vec<f64> {
    let (n1, n2, n3) = a.dims();
    let mut acc = alloc::vec![0.0; n1];
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let v = a.get(i, j, k);
                acc[i] += v * v;
            }
        }
    }
    acc.into_iter().map(|s| s.sqrt()).collect()
}

pub fn norm(a: &Tensor3, kind: NormKind, spec: &TransformSpec) -> Result<f64> {
    let (n1, n2, n3) = a.dims();
    Ok(match kind {
        NormKind::Fro => a.fro_norm(),
        NormKind::Inf => a.max_abs(),
        NormKind::L1 => a.as_slice().iter().map(|v| v.abs()).sum(),
        NormKind::Spectral => slice_singular_values(a, spec)?
            .iter()
            .map(|s| s.first().copied().unwrap_or(0.0))
            .fold(0.0, f64::max),
        NormKind::Nuclear => {
            slice_singular_values(a, spec)?
                .iter()
                .map(|s| s.iter().sum::<f64>())
                .sum::<f64>()
                / spec.ell()
        }
        NormKind::TwoInf => row_norms(a).into_iter().fold(0.0, f64::max),
        NormKind::InfTwo => {
            let mut cols = alloc::vec![0.0; n2];
            for k in 0..n3 {
                for j in 0..n2 {
                    for i in 0..n1 {
                        let v = a.get(i, j, k);
                        cols[j] += v * v;
                    }
                }
            }
            let lateral = cols.into_iter().fold(0.0, f64::max).sqrt();
            row_norms(a).into_iter().fold(lateral, f64::max)
        }
        NormKind::TwoTwoInf => {
            let mut best: f64 = 0.0;
            for k in 0..n3 {
                for i in 0..n1 {
                    let s: f64 = (0..n2).map(|j| a.get(i, j, k).powi(2)).sum();
                    best = best.max(s);
                }
            }
            best.sqrt()
        }
    })
}

/// Per-slice ranks of the transformed tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiRank {
    pub ranks: Vec<usize>,
    pub s_r: usize,
    pub tubal: usize,
}

impl MultiRank {
    pub fn from_ranks(ranks: Vec<usize>) -> Self {
        let s_r = ranks.iter().sum();
        let tubal = ranks.iter().copied().max().unwrap_or(0);
        Self { ranks, s_r, tubal }
    }
}

/// Counts singular values above `tol` times the largest one over all slices.
pub fn multi_rank(a: &Tensor3, spec: &TransformSpec, tol: f64) -> Result<MultiRank> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {tol}")));
    }
    let sv = slice_singular_values(a, spec)?;
    Ok(ranks_from_singular_values(&sv, tol))
}

pub(crate) fn ranks_from_singular_values(sv: &[Vec<f64>], tol: f64) -> MultiRank {
    let smax = sv.iter().flatten().copied().fold(0.0, f64::max);
    let cut = tol.max(RANK_FLOOR) * smax;
    MultiRank::from_ranks(
        sv.iter()
            .map(|s| if smax > 0.0 { s.iter().filter(|&&x| x > cut).count() } else { 0 })
            .collect(),
    )
}
