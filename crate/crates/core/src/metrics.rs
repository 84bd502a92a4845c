//! Ground-truth-aware quantities: extreme singular values, incoherence,
//! the scaled factor distance with its optimal alignment, relative error.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

#[allow(unused_imports)] // float methods are inherent only when std is linked
use num_traits::Float;
use crate::error::{mismatch, Error, Result};
use crate::talg::{self, row_norms, MultiRank};
use crate::tensor::Tensor3;
use crate::transform::{SpectralTensor, TransformSpec};

/// Iteration cap of the per-slice alignment solver.
pub const ALIGN_MAX_ITERS: usize = 1000;
/// Stopping tolerance on the alignment criterion, relative to `sigma_1^2`.
pub const ALIGN_STOP_TOL: f64 = 1e-10;
/// Largest criterion residual (relative to `sigma_1^2`) accepted at the cap.
pub const ALIGN_ACCEPT_TOL: f64 = 1e-8;

/// The low-rank ground truth `X = U * G * V^H = L * R^H`.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub l: Tensor3,
    pub r: Tensor3,
    pub g: Tensor3,
    pub u: Tensor3,
    pub v: Tensor3,
    pub x: Tensor3,
    pub mrank: MultiRank,
    pub spec: TransformSpec,
}

impl GroundTruth {
    /// Builds the balanced factors `L = U * G^{1/2}`, `R = V * G^{1/2}` from
    /// orthogonal `U`, `V` and an f-diagonal `G` with nonnegative diagonal.
    pub fn from_svd(u: Tensor3, g: Tensor3, v: Tensor3, spec: TransformSpec) -> Result<Self> {
        let (n1, r, n3) = u.dims();
        let (n2, rv, _) = v.dims();
        if rv != r || g.dims() != (r, r, n3) || v.dims().2 != n3 {
            return Err(mismatch(
                "GroundTruth::from_svd",
                format!("U {:?}, G {:?}, V {:?}", u.dims(), g.dims(), v.dims()),
            ));
        }
        spec.check_n3(n3, "GroundTruth::from_svd")?;
        let root = talg::t_sqrt(&g, &spec)?;
        let l = talg::t_product(&u, &root, &spec)?;
        let rr = talg::t_product(&v, &root, &spec)?;
        let x = talg::t_product(&l, &talg::conj_transpose(&rr, &spec)?, &spec)?;
        let sigmas = diagonals(&spec.forward(&g)?);
        let mrank = talg::ranks_from_singular_values(&sigmas, talg::RANK_FLOOR);
        debug_assert_eq!(x.dims(), (n1, n2, n3));
        Ok(Self { l, r: rr, g, u, v, x, mrank, spec })
    }

    pub fn rank(&self) -> usize {
        self.g.dims().0
    }

    /// `(sigma_1, sigma_{s_r}, kappa)` of the ground truth.
    pub fn singular_extremes(&self) -> Result<(f64, f64, f64)> {
        singular_extremes(&self.g, &self.mrank, &self.spec)
    }

    pub fn factors(&self) -> FactorPair {
        FactorPair { l: self.l.clone(), r: self.r.clone() }
    }
}

/// Real parts of the diagonals of every transformed slice.
fn diagonals(gbar: &SpectralTensor) -> Vec<Vec<f64>> {
    gbar.slices()
        .iter()
        .map(|s| (0..s.nrows().min(s.ncols())).map(|i| s[(i, i)].re).collect())
        .collect()
}

/// The factored variable `F = [L; R]` with `X = L * R^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub l: Tensor3,
    pub r: Tensor3,
}

impl FactorPair {
    pub fn new(l: Tensor3, r: Tensor3) -> Result<Self> {
        let (_, rl, n3l) = l.dims();
        let (_, rr, n3r) = r.dims();
        if rl != rr || n3l != n3r {
            return Err(mismatch(
                "FactorPair::new",
                format!("L {:?} and R {:?} must share rank and n3", l.dims(), r.dims()),
            ));
        }
        Ok(Self { l, r })
    }

    pub fn rank(&self) -> usize {
        self.l.dims().1
    }

    /// `L * R^H`.
    pub fn product(&self, spec: &TransformSpec) -> Result<Tensor3> {
        let lbar = spec.forward(&self.l)?;
        let rbar = spec.forward(&self.r)?;
        spec.inverse_for_ops(&lbar.facewise_mul(&rbar.adjoint())?)
    }
}

/// `(sigma_1, sigma_{s_r}, kappa)` over the positive transformed diagonal
/// entries `Gbar(i, i, k)` with `i < r_k`.
pub fn singular_extremes(g: &Tensor3, mrank: &MultiRank, spec: &TransformSpec) -> Result<(f64, f64, f64)> {
    if mrank.s_r == 0 {
        return Err(Error::EmptySpectrum);
    }
    let diags = diagonals(&spec.forward(g)?);
    if mrank.ranks.len() != diags.len() {
        return Err(mismatch(
            "singular_extremes",
            format!("multi-rank has {} entries for n3 = {}", mrank.ranks.len(), diags.len()),
        ));
    }
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (d, &rk) in diags.iter().zip(&mrank.ranks) {
        for &s in d.iter().take(rk).filter(|&&s| s > 0.0) {
            hi = hi.max(s);
            lo = lo.min(s);
        }
    }
    if !hi.is_finite() {
        return Err(Error::EmptySpectrum);
    }
    Ok((hi, lo, hi / lo))
}

/// Smallest `mu` for which both incoherence conditions hold:
/// `max(n1 n3 ell ||U||_{2,inf}^2, n2 n3 ell ||V||_{2,inf}^2) / s_r`.
pub fn incoherence(gt: &GroundTruth) -> f64 {
    let (n1, _, n3) = gt.u.dims();
    let n2 = gt.v.dims().0;
    let ell = gt.spec.ell();
    let u2 = row_norms(&gt.u).into_iter().fold(0.0, f64::max).powi(2);
    let v2 = row_norms(&gt.v).into_iter().fold(0.0, f64::max).powi(2);
    let s_r = gt.mrank.s_r.max(1) as f64;
    (n1 as f64 * n3 as f64 * ell * u2).max(n2 as f64 * n3 as f64 * ell * v2) / s_r
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub q: Tensor3,
    pub dist: f64,
    /// Frobenius norm of the first-order alignment criterion at `q`.
    pub criterion_residual: f64,
    /// Largest iteration count over the transformed slices.
    pub iterations: usize,
}

struct SliceAlignment {
    q: DMatrix<Complex64>,
    objective: f64,
    criterion: f64,
    iterations: usize,
}

/// One transformed slice of the alignment problem.
struct SliceProblem {
    l: DMatrix<Complex64>,
    r: DMatrix<Complex64>,
    ls: DMatrix<Complex64>,
    rs: DMatrix<Complex64>,
    a: DMatrix<Complex64>,  // L^H L
    a2: DMatrix<Complex64>, // R^H R
    w: Vec<f64>,
    sw: Vec<f64>,
}

fn scale_cols(m: &DMatrix<Complex64>, d: &[f64]) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for (j, &dj) in d.iter().enumerate() {
        out.column_mut(j).iter_mut().for_each(|z| *z *= dj);
    }
    out
}

fn scale_rows(m: &DMatrix<Complex64>, d: &[f64]) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for (i, &di) in d.iter().enumerate() {
        out.row_mut(i).iter_mut().for_each(|z| *z *= di);
    }
    out
}

impl SliceProblem {
    /// Returns `(f(Q), C(Q))`, or `None` if `Q` is singular. Both are formed
    /// from the `n x r` residuals; Gram shortcuts lose the criterion to
    /// cancellation near the optimum.
    fn eval(&self, q: &DMatrix<Complex64>) -> Option<(f64, DMatrix<Complex64>)> {
        let p = q.clone().try_inverse()?.adjoint();
        let lq = &self.l * q;
        let rp = &self.r * &p;
        let e1 = &lq - &self.ls;
        let e2 = &rp - &self.rs;
        let f = scale_cols(&e1, &self.sw).norm_squared() + scale_cols(&e2, &self.sw).norm_squared();
        // C = (LQ)^H (LQ - L*) W - W (RP - R*)^H R P
        let left = scale_cols(&(lq.adjoint() * e1), &self.w);
        let right = scale_rows(&(e2.adjoint() * rp), &self.w);
        Some((f, left - right))
    }
}

impl SliceProblem {
    /// Solves `A~ D W + W D A2~ = -C` with `A~ = (LQ)^H LQ`,
    /// `A2~ = (RQ^{-H})^H RQ^{-H}`: the minimizer of the objective linearized
    /// in `D` around `Q`.
    fn gauss_newton(&self, q: &DMatrix<Complex64>, crit: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
        let n = self.w.len();
        let p = q.clone().try_inverse()?.adjoint();
        let at = q.adjoint() * &self.a * q;
        let a2t = p.adjoint() * &self.a2 * &p;
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.w.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let m = w.kronecker(&at) + a2t.transpose().kronecker(&w);
        let rhs = nalgebra::DVector::from_iterator(n * n, crit.iter().map(|z| -z));
        let sol = m.lu().solve(&rhs)?;
        let d = DMatrix::from_vec(n, n, sol.as_slice().to_vec());
        d.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(d)
    }
}

fn gram(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.adjoint() * b
}

fn full_column_rank(m: &DMatrix<Complex64>, real: bool) -> bool {
    match crate::linalg::singular_values(m, real) {
        Some(s) => {
            let smax = s.first().copied().unwrap_or(0.0);
            let smin = s.last().copied().unwrap_or(0.0);
            smax > 0.0 && smin > talg::RANK_FLOOR * smax
        }
        None => false,
    }
}

fn select_cols(m: &DMatrix<Complex64>, idx: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

#[allow(clippy::too_many_arguments)]
fn align_slice(
    k: usize,
    real: bool,
    l: &DMatrix<Complex64>,
    r: &DMatrix<Complex64>,
    ls: &DMatrix<Complex64>,
    rs: &DMatrix<Complex64>,
    w_full: &[f64],
    sigma1: f64,
    stop: f64,
    accept: f64,
) -> Result<SliceAlignment> {
    let rank = w_full.len();
    let support: Vec<usize> = (0..rank).filter(|&i| w_full[i] > talg::RANK_FLOOR * sigma1).collect();
    let mut q_full = DMatrix::<Complex64>::identity(rank, rank);
    if support.is_empty() {
        return Ok(SliceAlignment { q: q_full, objective: 0.0, criterion: 0.0, iterations: 0 });
    }
    let (l, r) = (select_cols(l, &support), select_cols(r, &support));
    let (ls, rs) = (select_cols(ls, &support), select_cols(rs, &support));
    let w: Vec<f64> = support.iter().map(|&i| w_full[i]).collect();
    if !full_column_rank(&l, real) || !full_column_rank(&r, real) {
        return Err(Error::RankDeficientFactor { slice: k });
    }
    let sw = w.iter().map(|x| x.sqrt()).collect();
    let prob = SliceProblem { a: gram(&l, &l), a2: gram(&r, &r), l, r, ls, rs, w, sw };
    let mut q = prob
        .a
        .clone()
        .try_inverse()
        .ok_or(Error::RankDeficientFactor { slice: k })?
        * gram(&prob.l, &prob.ls);
    let (mut f, mut crit) = match prob.eval(&q) {
        Some(v) => v,
        // least-squares start singular: fall back to the identity
        None => {
            q = DMatrix::identity(prob.w.len(), prob.w.len());
            prob.eval(&q).ok_or(Error::RankDeficientFactor { slice: k })?
        }
    };
    let winv: Vec<f64> = prob.w.iter().map(|x| 1.0 / x).collect();
    let mut iterations = 0;
    while crit.norm() > stop && iterations < ALIGN_MAX_ITERS {
        // multiplicative step Q <- Q (I + s D) along the Gauss-Newton direction,
        // falling back to the diagonally preconditioned gradient
        let d = prob
            .gauss_newton(&q, &crit)
            .unwrap_or_else(|| -scale_cols(&scale_rows(&crit, &winv), &winv));
        let slope = 2.0 * crit.dotc(&d).re;
        if !(slope < 0.0) {
            break;
        }
        let eye = DMatrix::<Complex64>::identity(prob.w.len(), prob.w.len());
        let mut s = 1.0;
        let mut accepted = None;
        while s > 1e-12 {
            let cand = &q * (&eye + &d * Complex64::new(s, 0.0));
            if let Some((fc, cc)) = prob.eval(&cand) {
                // near the optimum the objective stalls at rounding level; the
                // criterion still tells progress apart
                let stalled = fc <= f + 64.0 * f64::EPSILON * f.abs() && cc.norm() < crit.norm();
                if fc <= f + 1e-4 * s * slope || stalled {
                    accepted = Some((cand, fc, cc));
                    break;
                }
            }
            s *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((qn, fnew, cnew)) => {
                q = qn;
                f = fnew;
                crit = cnew;
            }
            None => break,
        }
    }
    let residual = crit.norm();
    if residual > accept {
        return Err(Error::NoConvergence { residual });
    }
    let objective = f;
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            q_full[(i, j)] = q[(a, b)];
        }
    }
    Ok(SliceAlignment { q: q_full, objective, criterion: residual, iterations })
}

/// Optimal alignment tensor `Q` minimizing
/// `||(L*Q - L*) * G^{1/2}||_F^2 + ||(R*Q^{-H} - R*) * G^{1/2}||_F^2`,
/// solved independently in each transformed slice.
pub fn align(f: &FactorPair, gt: &GroundTruth) -> Result<AlignmentResult> {
    if f.l.dims() != gt.l.dims() || f.r.dims() != gt.r.dims() {
        return Err(mismatch(
            "align",
            format!(
                "F has L {:?}, R {:?}; ground truth has L {:?}, R {:?}",
                f.l.dims(),
                f.r.dims(),
                gt.l.dims(),
                gt.r.dims()
            ),
        ));
    }
    let spec = &gt.spec;
    let (lb, rb) = (spec.forward(&f.l)?, spec.forward(&f.r)?);
    let (lsb, rsb) = (spec.forward(&gt.l)?, spec.forward(&gt.r)?);
    let w = diagonals(&spec.forward(&gt.g)?);
    let sigma1 = w.iter().flatten().copied().fold(0.0, f64::max);
    let n3 = spec.n3() as f64;
    let ell = spec.ell();
    // per-slice tolerances chosen so the tensor-level criterion meets the bound
    let slice_scale = (ell / n3).sqrt() * sigma1 * sigma1;
    let results = spec.map_slices(
        |k, real| {
            align_slice(
                k,
                real,
                lb.slice(k),
                rb.slice(k),
                lsb.slice(k),
                rsb.slice(k),
                &w[k],
                sigma1,
                ALIGN_STOP_TOL * slice_scale,
                ALIGN_ACCEPT_TOL * slice_scale,
            )
        },
        |s| SliceAlignment {
            q: s.q.map(|z| z.conj()),
            objective: s.objective,
            criterion: s.criterion,
            iterations: s.iterations,
        },
    )?;
    let objective: f64 = results.iter().map(|s| s.objective).sum::<f64>() / ell;
    let criterion = (results.iter().map(|s| s.criterion * s.criterion).sum::<f64>() / ell).sqrt();
    let iterations = results.iter().map(|s| s.iterations).max().unwrap_or(0);
    let qbar = SpectralTensor::from_slices(results.into_iter().map(|s| s.q).collect())?;
    Ok(AlignmentResult {
        q: spec.inverse_for_ops(&qbar)?,
        dist: objective.max(0.0).sqrt(),
        criterion_residual: criterion,
        iterations,
    })
}

pub fn dist(f: &FactorPair, gt: &GroundTruth) -> Result<f64> {
    Ok(align(f, gt)?.dist)
}

/// `||X - X*||_F / ||X*||_F`.
pub fn relative_error(x: &Tensor3, xstar: &Tensor3) -> Result<f64> {
    x.ensure_same_dims(xstar, "relative_error")?;
    let denom = xstar.fro_norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num = x
        .as_slice()
        .iter()
        .zip(xstar.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// Objective of the distance metric at a given `Q`, evaluated directly.
pub fn alignment_objective(f: &FactorPair, q: &Tensor3, gt: &GroundTruth) -> Result<f64> {
    let spec = &gt.spec;
    let root = talg::t_sqrt(&gt.g, spec)?;
    let lq = talg::t_product(&f.l, q, spec)?;
    let qinv_h = talg::conj_transpose(&talg::t_inverse(q, spec)?, spec)?;
    let rq = talg::t_product(&f.r, &qinv_h, spec)?;
    let a = talg::t_product(&(&lq - &gt.l), &root, spec)?;
    let b = talg::t_product(&(&rq - &gt.r), &root, spec)?;
    Ok(a.fro_norm().powi(2) + b.fro_norm().powi(2))
}

/// Frobenius norm of the alignment criterion
/// `(L*Q)^H * (L*Q - L*) * G - G * (R*Q^{-H} - R*)^H * R*Q^{-H}`.
pub fn alignment_criterion(f: &FactorPair, q: &Tensor3, gt: &GroundTruth) -> Result<f64> {
    let spec = &gt.spec;
    let ct = |a: &Tensor3| talg::conj_transpose(a, spec);
    let lq = talg::t_product(&f.l, q, spec)?;
    let rq = talg::t_product(&f.r, &ct(&talg::t_inverse(q, spec)?)?, spec)?;
    let left = talg::t_product(&talg::t_product(&ct(&lq)?, &(&lq - &gt.l), spec)?, &gt.g, spec)?;
    let right = talg::t_product(&talg::t_product(&gt.g, &ct(&(&rq - &gt.r))?, spec)?, &rq, spec)?;
    Ok((&left - &right).fro_norm())
}
