//! Brute-force oracles shared by the integration tests: transforms applied
//! with explicit loops over a closed-form `Phi`, and t-algebra done on the
//! block-diagonal matrix of transformed slices.
#![allow(dead_code)]

pub mod lemmas;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsvd_core::{Tensor3, TransformKind};

pub type CMat = DMatrix<Complex64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(n1: usize, n2: usize, n3: usize, rng: &mut ChaCha8Rng) -> Tensor3 {
    Tensor3::from_fn(n1, n2, n3, |_, _, _| rng.random_range(-1.0..1.0))
}

/// Closed-form `Phi` and `ell`.
pub fn phi(kind: TransformKind, n: usize) -> (CMat, f64) {
    match kind {
        TransformKind::Dft => (
            CMat::from_fn(n, n, |j, k| Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64)),
            n as f64,
        ),
        TransformKind::Dct => (
            CMat::from_fn(n, n, |k, m| {
                let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                Complex64::new(c * (PI * (2 * m + 1) as f64 * k as f64 / (2.0 * n as f64)).cos(), 0.0)
            }),
            1.0,
        ),
        TransformKind::Custom => panic!("no closed form"),
    }
}

/// Transformed frontal slices `Abar_k = sum_m Phi[k, m] A(:, :, m)`.
pub fn forward(a: &Tensor3, phi: &CMat) -> Vec<CMat> {
    let (n1, n2, n3) = a.dims();
    (0..n3)
        .map(|k| CMat::from_fn(n1, n2, |i, j| (0..n3).map(|m| phi[(k, m)] * a.get(i, j, m)).sum()))
        .collect()
}

/// `A(:, :, m) = (1/ell) sum_k conj(Phi[k, m]) Abar_k`, real part.
pub fn inverse(slices: &[CMat], phi: &CMat, ell: f64) -> Tensor3 {
    let n3 = slices.len();
    let (n1, n2) = slices[0].shape();
    Tensor3::from_fn(n1, n2, n3, |i, j, m| {
        (0..n3).map(|k| phi[(k, m)].conj() * slices[k][(i, j)]).sum::<Complex64>().re / ell
    })
}

pub fn bdiag(slices: &[CMat]) -> CMat {
    let (r, c) = slices[0].shape();
    let n = slices.len();
    let mut out = CMat::zeros(r * n, c * n);
    for (k, s) in slices.iter().enumerate() {
        out.view_mut((k * r, k * c), (r, c)).copy_from(s);
    }
    out
}

pub fn unbdiag(m: &CMat, r: usize, c: usize, n: usize) -> Vec<CMat> {
    (0..n).map(|k| m.view((k * r, k * c), (r, c)).into_owned()).collect()
}

/// Applies a matrix function to the block-diagonal form and maps back.
pub fn via_bdiag(
    a: &Tensor3,
    kind: TransformKind,
    out_shape: (usize, usize),
    f: impl FnOnce(&CMat) -> CMat,
) -> Tensor3 {
    let n3 = a.dims().2;
    let (p, ell) = phi(kind, n3);
    let m = f(&bdiag(&forward(a, &p)));
    inverse(&unbdiag(&m, out_shape.0, out_shape.1, n3), &p, ell)
}

pub fn t_product(a: &Tensor3, b: &Tensor3, kind: TransformKind) -> Tensor3 {
    let n3 = a.dims().2;
    let (p, ell) = phi(kind, n3);
    let m = bdiag(&forward(a, &p)) * bdiag(&forward(b, &p));
    inverse(&unbdiag(&m, a.dims().0, b.dims().1, n3), &p, ell)
}

pub fn conj_transpose(a: &Tensor3, kind: TransformKind) -> Tensor3 {
    via_bdiag(a, kind, (a.dims().1, a.dims().0), |m| m.adjoint())
}

pub fn t_inverse(a: &Tensor3, kind: TransformKind) -> Tensor3 {
    via_bdiag(a, kind, (a.dims().0, a.dims().1), |m| m.clone().try_inverse().expect("invertible"))
}

/// Singular values of the block-diagonal matrix, descending.
pub fn bdiag_singular_values(a: &Tensor3, kind: TransformKind) -> Vec<f64> {
    let (p, _) = phi(kind, a.dims().2);
    let mut s: Vec<f64> = bdiag(&forward(a, &p)).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

pub fn spectral_norm(a: &Tensor3, kind: TransformKind) -> f64 {
    bdiag_singular_values(a, kind)[0]
}

pub fn nuclear_norm(a: &Tensor3, kind: TransformKind) -> f64 {
    let (_, ell) = phi(kind, a.dims().2);
    bdiag_singular_values(a, kind).iter().sum::<f64>() / ell
}

pub fn rel(a: &Tensor3, b: &Tensor3) -> f64 {
    (a - b).fro_norm() / b.fro_norm().max(f64::MIN_POSITIVE)
}

pub fn rel_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Entries of `A` with probability `density`, zero elsewhere.
pub fn sparse_tensor(n1: usize, n2: usize, n3: usize, density: f64, rng: &mut ChaCha8Rng) -> Tensor3 {
    Tensor3::from_fn(n1, n2, n3, |_, _, _| {
        if rng.random::<f64>() < density { rng.random_range(-1.0..1.0) } else { 0.0 }
    })
}
