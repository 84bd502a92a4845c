//! Dense per-slice kernels shared by the t-algebra, metrics, and solvers.
//!
//! Every routine takes a `real` flag: slices known to be real (DCT slices,
//! the DC slice of a DFT) are factorized in real arithmetic so that their
//! factors come out exactly real.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

const EIGEN_MAX_ITERS: usize = 5000;

pub(crate) fn re(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub(crate) fn cx(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Thin SVD `m = u diag(s) v^H` with `s` nonincreasing.
#[derive(Debug, Clone)]
pub(crate) struct SliceSvd {
    pub u: DMatrix<Complex64>,
    pub s: Vec<f64>,
    pub v: DMatrix<Complex64>,
}

impl SliceSvd {
    pub fn conj(&self) -> SliceSvd {
        SliceSvd {
            u: self.u.map(|z| z.conj()),
            s: self.s.clone(),
            v: self.v.map(|z| z.conj()),
        }
    }
}

/// Thin SVD with the phase convention: the largest-magnitude entry of each
/// left singular vector is made real and positive.
///
/// Backed by faer: nalgebra's SVD loses accuracy on rank-deficient slices,
/// which are the norm here (exactly low-rank data, truncated spectra).
pub(crate) fn svd(m: &DMatrix<Complex64>, real: bool) -> Option<SliceSvd> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let (n1, n2) = m.shape();
    let p = n1.min(n2);
    let (mut u, s, mut v) = if real {
        let a = faer::Mat::<f64>::from_fn(n1, n2, |i, j| m[(i, j)].re);
        let d = a.thin_svd().ok()?;
        let (fu, fv) = (d.U(), d.V());
        let s: Vec<f64> = d.S().column_vector().iter().copied().collect();
        (
            DMatrix::from_fn(n1, p, |i, j| Complex64::new(fu[(i, j)], 0.0)),
            s,
            DMatrix::from_fn(n2, p, |i, j| Complex64::new(fv[(i, j)], 0.0)),
        )
    } else {
        let a = faer::Mat::<faer::c64>::from_fn(n1, n2, |i, j| m[(i, j)]);
        let d = a.thin_svd().ok()?;
        let (fu, fv) = (d.U(), d.V());
        let s: Vec<f64> = d.S().column_vector().iter().map(|z| z.re).collect();
        (
            DMatrix::from_fn(n1, p, |i, j| fu[(i, j)]),
            s,
            DMatrix::from_fn(n2, p, |i, j| fv[(i, j)]),
        )
    };
    if s.iter().any(|x| !x.is_finite()) || s.windows(2).any(|w| w[0] < w[1]) {
        return None;
    }
    for j in 0..u.ncols() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..u.nrows() {
            let a = u[(i, j)].norm();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if best_abs > 0.0 {
            let phase = (u[(best, j)] / best_abs).conj();
            u.column_mut(j).scale_mut_c(phase);
            v.column_mut(j).scale_mut_c(phase);
        }
    }
    Some(SliceSvd { u, s, v })
}

trait ScaleC {
    fn scale_mut_c(&mut self, c: Complex64);
}

impl<S> ScaleC for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_c(&mut self, c: Complex64) {
        for z in self.iter_mut() {
            *z *= c;
        }
    }
}

/// Nonincreasing singular values.
pub(crate) fn singular_values(m: &DMatrix<Complex64>, real: bool) -> Option<Vec<f64>> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let (n1, n2) = m.shape();
    let mut s = if real {
        faer::Mat::<f64>::from_fn(n1, n2, |i, j| m[(i, j)].re)
            .singular_values()
            .ok()?
    } else {
        faer::Mat::<faer::c64>::from_fn(n1, n2, |i, j| m[(i, j)])
            .singular_values()
            .ok()?
    };
    s.sort_by(|a, b| b.total_cmp(a));
    Some(s)
}

/// Eigen-decomposition of the Hermitian part of `m`; eigenvalues unsorted.
pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>, real: bool) -> Option<(Vec<f64>, DMatrix<Complex64>)> {
    if real {
        let r = re(m);
        let sym = (&r + r.transpose()) * 0.5;
        let e = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITERS)?;
        Some((e.eigenvalues.as_slice().to_vec(), cx(&e.eigenvectors)))
    } else {
        let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let e = SymmetricEigen::try_new(h, f64::EPSILON, EIGEN_MAX_ITERS)?;
        Some((e.eigenvalues.as_slice().to_vec(), e.eigenvectors))
    }
}

/// `v diag(d) v^H`.
pub(crate) fn from_eigen(d: &[f64], v: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut vd = v.clone();
    for (j, &dj) in d.iter().enumerate() {
        vd.column_mut(j).scale_mut_c(Complex64::new(dj, 0.0));
    }
    vd * v.adjoint()
}

/// `v diag(1/s) u^H`, the inverse of a square slice from its SVD.
pub(crate) fn inverse_from_svd(f: &SliceSvd) -> DMatrix<Complex64> {
    let mut v = f.v.clone();
    for (j, &sj) in f.s.iter().enumerate() {
        v.column_mut(j).scale_mut_c(Complex64::new(1.0 / sj, 0.0));
    }
    v * f.u.adjoint()
}

pub(crate) fn max_entry_dev(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n1: usize, n2: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n1, n2, |i, j| {
            let a = (i * 7 + j * 3) as f64;
            Complex64::new((a * 0.37).sin(), (a * 0.91).cos() * 0.5)
        })
    }

    #[test]
    fn svd_reconstructs_and_fixes_phase() {
        for (n1, n2) in [(4, 3), (3, 5), (4, 4)] {
            let m = sample(n1, n2);
            let f = svd(&m, false).unwrap();
            let mut us = f.u.clone();
            for j in 0..f.s.len() {
                us.column_mut(j).scale_mut_c(Complex64::new(f.s[j], 0.0));
            }
            assert!(max_entry_dev(&(us * f.v.adjoint()), &m) < 1e-12);
            assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
            for j in 0..f.u.ncols() {
                let col = f.u.column(j);
                let big = col.iter().fold(Complex64::new(0.0, 0.0), |b, z| if z.norm() > b.norm() { *z } else { b });
                assert!(big.im.abs() < 1e-14 && big.re > 0.0);
            }
        }
    }

    #[test]
    fn real_flag_gives_real_factors() {
        let m = sample(4, 3).map(|z| Complex64::new(z.re, 0.0));
        let f = svd(&m, true).unwrap();
        assert!(f.u.iter().chain(f.v.iter()).all(|z| z.im == 0.0));
        let g = svd(&m, false).unwrap();
        for (a, b) in f.s.iter().zip(&g.s) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn eigen_round_trip() {
        let a = sample(3, 3);
        let h = &a * a.adjoint();
        let (d, v) = hermitian_eigen(&h, false).unwrap();
        assert!(max_entry_dev(&from_eigen(&d, &v), &h) < 1e-12);
    }
}
