//! Scaled gradient descent for tensor factorization, robust PCA, and
//! completion, with vanilla gradient descent baselines.
//!
//! The loops keep the factors in the transform domain, where every t-product
//! is a batch of independent slice products, and only return to the spatial
//! domain for the entrywise operations (thresholding, masking).

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

#[allow(unused_imports)] // float methods are inherent only when std is linked
use num_traits::Float;
use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg;
use crate::metrics::{self, FactorPair, GroundTruth};
use crate::talg;
use crate::tensor::Tensor3;
use crate::transform::{SpectralTensor, TransformSpec};

/// Relative error above which a run is declared diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e2;
/// Largest eigenvalue ratio accepted in a preconditioner slice.
pub const PRECONDITIONER_COND_CAP: f64 = 1e12;
/// Histories record `dist` only up to this rank...
pub const DIST_MAX_RANK: usize = 6;
/// ...and this side length.
pub const DIST_MAX_SIDE: usize = 32;

/// Soft-threshold schedule `zeta_0`, then `zeta_t = zeta_1 rho^{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSchedule {
    pub zeta0: f64,
    pub zeta1: f64,
    pub rho: f64,
}

impl ThresholdSchedule {
    pub fn new(zeta0: f64, zeta1: f64, rho: f64) -> Result<Self> {
        let s = Self { zeta0, zeta1, rho };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta0 >= 0.0 && self.zeta0.is_finite()) {
            return Err(invalid("zeta0", format!("must be finite and >= 0, got {}", self.zeta0)));
        }
        if !(self.zeta1 >= 0.0 && self.zeta1.is_finite()) {
            return Err(invalid("zeta1", format!("must be finite and >= 0, got {}", self.zeta1)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid("rho", format!("must lie in (0, 1), got {}", self.rho)));
        }
        Ok(())
    }

    pub fn zeta(&self, t: usize) -> f64 {
        match t {
            0 => self.zeta0,
            _ => self.zeta1 * self.rho.powi((t - 1) as i32),
        }
    }

    /// Every threshold scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { zeta0: c * self.zeta0, zeta1: c * self.zeta1, rho: self.rho }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ScaledGd,
    VanillaGd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ScaledGd => "scaledgd",
            Method::VanillaGd => "vanillagd",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scaledgd" => Ok(Method::ScaledGd),
            "vanillagd" | "gd" => Ok(Method::VanillaGd),
            other => Err(invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub eta: f64,
    pub max_iters: usize,
    pub rank: usize,
    /// Stop once the recorded relative error is at or below this value.
    pub rel_tol: f64,
    pub method: Method,
    /// `sigma_1` used to scale the vanilla step, `eta / sigma_1`.
    pub sigma1_hint: Option<f64>,
    /// Radius of the scaled projection (completion only).
    pub projection_radius: Option<f64>,
}

impl SolverParams {
    pub fn new(rank: usize) -> Self {
        Self {
            eta: 0.5,
            max_iters: 100,
            rank,
            rel_tol: 1e-14,
            method: Method::ScaledGd,
            sigma1_hint: None,
            projection_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(invalid("eta", format!("must be finite and >= 0, got {}", self.eta)));
        }
        if self.rank == 0 {
            return Err(invalid("rank", "must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(invalid("rel_tol", format!("must be >= 0, got {}", self.rel_tol)));
        }
        if let Some(s) = self.sigma1_hint {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("sigma1_hint", format!("must be positive, got {s}")));
            }
        }
        if let Some(s) = self.projection_radius {
            if !(s > 0.0) {
                return Err(invalid("projection_radius", format!("must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Observed entries `Omega` and the nominal sampling rate `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    n1: usize,
    n2: usize,
    n3: usize,
    mask: Vec<bool>,
    p: f64,
}

impl ObservationSet {
    /// `mask` uses the tensor storage order (see [`Tensor3`]).
    pub fn new(n1: usize, n2: usize, n3: usize, mask: Vec<bool>, p: f64) -> Result<Self> {
        if mask.len() != n1 * n2 * n3 {
            return Err(mismatch(
                "ObservationSet::new",
                format!("{} mask entries for {n1}x{n2}x{n3}", mask.len()),
            ));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(invalid("p", format!("must lie in (0, 1], got {p}")));
        }
        Ok(Self { n1, n2, n3, mask, p })
    }

    pub fn full(n1: usize, n2: usize, n3: usize) -> Self {
        Self { n1, n2, n3, mask: alloc::vec![true; n1 * n2 * n3], p: 1.0 }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        self.mask[k * self.n1 * self.n2 + j * self.n1 + i]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    fn check(&self, x: &Tensor3, op: &'static str) -> Result<()> {
        if x.dims() != self.dims() {
            return Err(mismatch(op, format!("tensor {:?} vs mask {:?}", x.dims(), self.dims())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub rel_err: f64,
    pub dist: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    /// Reached `rel_tol`.
    Converged,
    MaxIters,
    /// Relative error exceeded the divergence limit or became non-finite.
    Diverged,
    /// A step failed; the history ends at the last good iterate.
    Failed(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
}

impl RunHistory {
    pub fn final_rel_err(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.rel_err)
    }

    /// First recorded iteration with `rel_err <= threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.rel_err <= threshold).map(|r| r.iter)
    }
}

/// Monotonic time source for the per-iteration wall-clock column.
pub trait Clock {
    /// Seconds since an arbitrary fixed origin.
    fn elapsed_s(&self) -> f64;
}

/// Clock that always reads zero; used for reproducible traces.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_s(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub factors: FactorPair,
    /// Final sparse estimate (robust PCA only).
    pub sparse: Option<Tensor3>,
    pub history: RunHistory,
}

/// Entrywise `sgn(m) max(0, |m| - zeta)`.
pub fn soft_threshold(m: &Tensor3, zeta: f64) -> Result<Tensor3> {
    if !(zeta >= 0.0) {
        return Err(Error::NegativeThreshold(zeta));
    }
    Ok(m.map(|v| shrink(v, zeta)))
}

#[inline]
fn shrink(v: f64, zeta: f64) -> f64 {
    let a = v.abs() - zeta;
    if a > 0.0 {
        a.copysign(v)
    } else {
        0.0
    }
}

/// Keeps observed entries and zeroes the rest.
pub fn project_observed(x: &Tensor3, obs: &ObservationSet) -> Result<Tensor3> {
    obs.check(x, "project_observed")?;
    let mut out = x.clone();
    for (v, &m) in out.as_mut_slice().iter_mut().zip(&obs.mask) {
        if !m {
            *v = 0.0;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// transform-domain kernels

fn conj_matrix(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.map(|z| z.conj())
}

/// Spectrum of `A * B^H`.
fn product_h(a: &SpectralTensor, b: &SpectralTensor, spec: &TransformSpec) -> Result<SpectralTensor> {
    let slices = spec.map_slices(|k, _| Ok(a.slice(k) * b.slice(k).adjoint()), conj_matrix)?;
    SpectralTensor::from_slices(slices)
}

#[derive(Debug, Clone, Copy)]
enum StepRule {
    Scaled(f64),
    Plain(f64),
}

/// `M P^{-1}` for a Hermitian positive definite `P` with bounded condition.
fn right_solve(m: &DMatrix<Complex64>, p: DMatrix<Complex64>, real: bool) -> Option<DMatrix<Complex64>> {
    let (eig, _) = linalg::hermitian_eigen(&p, real)?;
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(hi > 0.0) || !(lo * PRECONDITIONER_COND_CAP > hi) {
        return None;
    }
    let chol = nalgebra::Cholesky::new(p)?;
    Some(chol.solve(&m.adjoint()).adjoint())
}

/// One simultaneous factor update from the residual spectrum `dbar`:
/// `L - step (D * R) P_R`, `R - step (D^H * L) P_L`.
fn update_factors(
    lbar: &SpectralTensor,
    rbar: &SpectralTensor,
    dbar: &SpectralTensor,
    rule: StepRule,
    spec: &TransformSpec,
    iteration: usize,
) -> Result<(SpectralTensor, SpectralTensor)> {
    let pairs = spec.map_slices(
        |k, real| {
            let (l, r, d) = (lbar.slice(k), rbar.slice(k), dbar.slice(k));
            let gl = d * r;
            let gr = d.adjoint() * l;
            let (dl, dr, step) = match rule {
                StepRule::Plain(step) => (gl, gr, step),
                StepRule::Scaled(eta) => {
                    let singular = Error::PreconditionerSingular { slice: k, iteration };
                    let dl = right_solve(&gl, r.adjoint() * r, real).ok_or(singular.clone())?;
                    let dr = right_solve(&gr, l.adjoint() * l, real).ok_or(singular)?;
                    (dl, dr, eta)
                }
            };
            let c = Complex64::new(step, 0.0);
            Ok((l - dl * c, r - dr * c))
        },
        |(l, r)| (conj_matrix(l), conj_matrix(r)),
    )?;
    let (ls, rs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((SpectralTensor::from_slices(ls)?, SpectralTensor::from_slices(rs)?))
}

fn spectral_pair(f: &FactorPair, spec: &TransformSpec) -> Result<(SpectralTensor, SpectralTensor)> {
    Ok((spec.forward(&f.l)?, spec.forward(&f.r)?))
}

fn spatial_pair(lbar: &SpectralTensor, rbar: &SpectralTensor, spec: &TransformSpec) -> Result<FactorPair> {
    Ok(FactorPair { l: spec.inverse_for_ops(lbar)?, r: spec.inverse_for_ops(rbar)? })
}

fn check_pair(f: &FactorPair, n1: usize, n2: usize, n3: usize, op: &'static str) -> Result<()> {
    let r = f.rank();
    if f.l.dims() != (n1, r, n3) || f.r.dims() != (n2, r, n3) {
        return Err(mismatch(
            op,
            format!("factors L {:?}, R {:?} for data {n1}x{n2}x{n3}", f.l.dims(), f.r.dims()),
        ));
    }
    Ok(())
}

/// Balanced factors `U G^{1/2}`, `V G^{1/2}` of the top-`r` t-SVD, as spectra.
fn spectral_init(
    a: &Tensor3,
    r: usize,
    spec: &TransformSpec,
) -> Result<(SpectralTensor, SpectralTensor)> {
    let (n1, n2, _) = a.dims();
    let max = n1.min(n2);
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    let svds = talg::spectral_svd(&spec.forward(a)?, spec)?;
    let mut ls = Vec::with_capacity(svds.len());
    let mut rs = Vec::with_capacity(svds.len());
    for f in &svds {
        let mut l = f.u.columns(0, r).into_owned();
        let mut rr = f.v.columns(0, r).into_owned();
        for j in 0..r {
            let s = Complex64::new(f.s[j].sqrt(), 0.0);
            l.column_mut(j).iter_mut().for_each(|z| *z *= s);
            rr.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        ls.push(l);
        rs.push(rr);
    }
    Ok((SpectralTensor::from_slices(ls)?, SpectralTensor::from_slices(rs)?))
}

// ---------------------------------------------------------------------------
// robust PCA

/// `S0 = T_{zeta0}(Y)` and balanced factors of the top-`r` t-SVD of `Y - S0`.
pub fn spectral_init_rpca(
    y: &Tensor3,
    r: usize,
    zeta0: f64,
    spec: &TransformSpec,
) -> Result<(FactorPair, Tensor3)> {
    spec.check_n3(y.dims().2, "spectral_init_rpca")?;
    let s0 = soft_threshold(y, zeta0)?;
    let (lbar, rbar) = spectral_init(&(y - &s0), r, spec)?;
    Ok((spatial_pair(&lbar, &rbar, spec)?, s0))
}

/// One robust PCA update. Returns the new factors and `S_{t+1}`.
pub fn rpca_step(
    f: &FactorPair,
    y: &Tensor3,
    zeta_next: f64,
    eta: f64,
    spec: &TransformSpec,
) -> Result<(FactorPair, Tensor3)> {
    let (n1, n2, n3) = y.dims();
    check_pair(f, n1, n2, n3, "rpca_step")?;
    let (lbar, rbar) = spectral_pair(f, spec)?;
    let x = spec.inverse_for_ops(&product_h(&lbar, &rbar, spec)?)?;
    let (s, d) = rpca_residual(&x, y, zeta_next)?;
    let (l2, r2) = update_factors(&lbar, &rbar, &spec.forward(&d)?, StepRule::Scaled(eta), spec, 0)?;
    Ok((spatial_pair(&l2, &r2, spec)?, s))
}

/// `S = T_zeta(Y - X)` and the gradient residual `X + S - Y`.
fn rpca_residual(x: &Tensor3, y: &Tensor3, zeta: f64) -> Result<(Tensor3, Tensor3)> {
    if !(zeta >= 0.0) {
        return Err(Error::NegativeThreshold(zeta));
    }
    let (n1, n2, n3) = x.dims();
    let mut s = Tensor3::zeros(n1, n2, n3);
    let mut d = Tensor3::zeros(n1, n2, n3);
    for ((sv, dv), (&xv, &yv)) in s
        .as_mut_slice()
        .iter_mut()
        .zip(d.as_mut_slice())
        .zip(x.as_slice().iter().zip(y.as_slice()))
    {
        *sv = shrink(yv - xv, zeta);
        *dv = xv + *sv - yv;
    }
    Ok((s, d))
}

fn step_rule(params: &SolverParams, gt: Option<&GroundTruth>) -> Result<StepRule> {
    match params.method {
        Method::ScaledGd => Ok(StepRule::Scaled(params.eta)),
        Method::VanillaGd => {
            let sigma1 = match (params.sigma1_hint, gt) {
                (Some(s), _) => s,
                (None, Some(gt)) => gt.singular_extremes()?.0,
                (None, None) => {
                    return Err(invalid(
                        "sigma1_hint",
                        "vanilla gradient descent needs sigma_1 (hint or ground truth)",
                    ))
                }
            };
            Ok(StepRule::Plain(params.eta / sigma1))
        }
    }
}

/// Shared bookkeeping of the three solver loops.
struct Recorder<'a> {
    params: &'a SolverParams,
    gt: Option<&'a GroundTruth>,
    clock: &'a dyn Clock,
    start: f64,
    /// Time spent in the distance metric, kept out of the wall-clock column.
    overhead: f64,
    track_dist: bool,
    records: Vec<IterRecord>,
}

impl<'a> Recorder<'a> {
    fn new(params: &'a SolverParams, gt: Option<&'a GroundTruth>, clock: &'a dyn Clock, n1: usize, n2: usize) -> Self {
        let track_dist = gt.is_some() && params.rank <= DIST_MAX_RANK && n1.max(n2) <= DIST_MAX_SIDE;
        Self { params, gt, clock, start: clock.elapsed_s(), overhead: 0.0, track_dist, records: Vec::new() }
    }

    /// Records an iterate; returns the terminal status if the run should stop.
    fn record(
        &mut self,
        iter: usize,
        rel_err: f64,
        factors: impl FnOnce() -> Result<FactorPair>,
    ) -> Option<RunStatus> {
        let now = self.clock.elapsed_s();
        let wall_time_s = now - self.start - self.overhead;
        let dist = match (self.track_dist, self.gt) {
            (true, Some(gt)) if rel_err.is_finite() => {
                let d = factors().ok().and_then(|f| metrics::dist(&f, gt).ok());
                self.overhead += self.clock.elapsed_s() - now;
                d
            }
            _ => None,
        };
        self.records.push(IterRecord { iter, rel_err, dist, wall_time_s });
        if !rel_err.is_finite() || rel_err > DIVERGENCE_LIMIT {
            Some(RunStatus::Diverged)
        } else if rel_err <= self.params.rel_tol {
            Some(RunStatus::Converged)
        } else {
            None
        }
    }

    fn finish(self, status: Option<RunStatus>) -> RunHistory {
        RunHistory { records: self.records, status: status.unwrap_or(RunStatus::MaxIters) }
    }
}

fn rel_to(x: &Tensor3, reference: &Tensor3) -> f64 {
    metrics::relative_error(x, reference).unwrap_or(f64::NAN)
}

/// Robust PCA from the spectral initialization.
pub fn run_rpca(
    y: &Tensor3,
    params: &SolverParams,
    sched: &ThresholdSchedule,
    spec: &TransformSpec,
    gt: Option<&GroundTruth>,
) -> Result<SolverOutput> {
    sched.validate()?;
    let (init, _) = spectral_init_rpca(y, params.rank, sched.zeta0, spec)?;
    run_rpca_from(y, init, params, sched, spec, gt, &NoClock)
}

/// Robust PCA from given initial factors (shared between methods by the
/// harness so that both start from the same point).
pub fn run_rpca_from(
    y: &Tensor3,
    init: FactorPair,
    params: &SolverParams,
    sched: &ThresholdSchedule,
    spec: &TransformSpec,
    gt: Option<&GroundTruth>,
    clock: &dyn Clock,
) -> Result<SolverOutput> {
    params.validate()?;
    sched.validate()?;
    let (n1, n2, n3) = y.dims();
    spec.check_n3(n3, "run_rpca")?;
    check_pair(&init, n1, n2, n3, "run_rpca")?;
    if let Some(gt) = gt {
        y.ensure_same_dims(&gt.x, "run_rpca")?;
    }
    let rule = step_rule(params, gt)?;
    let y_norm = y.fro_norm();
    let rel = |x: &Tensor3, s: &Tensor3| match gt {
        Some(gt) => rel_to(x, &gt.x),
        None => {
            let fit = (&(x + s) - y).fro_norm();
            if y_norm > 0.0 { fit / y_norm } else { fit }
        }
    };

    let mut rec = Recorder::new(params, gt, clock, n1, n2);
    let (mut lbar, mut rbar) = spectral_pair(&init, spec)?;
    let mut x = spec.inverse_for_ops(&product_h(&lbar, &rbar, spec)?)?;
    let mut s = soft_threshold(y, sched.zeta0)?;
    let mut status = rec.record(0, rel(&x, &s), || Ok(init.clone()));
    let mut t = 0;
    while status.is_none() && t < params.max_iters {
        let (s_next, d) = rpca_residual(&x, y, sched.zeta(t + 1))?;
        let step = spec
            .forward(&d)
            .and_then(|dbar| update_factors(&lbar, &rbar, &dbar, rule, spec, t));
        match step {
            Ok((l2, r2)) => {
                lbar = l2;
                rbar = r2;
            }
            Err(e) => {
                status = Some(RunStatus::Failed(e));
                break;
            }
        }
        s = s_next;
        t += 1;
        x = spec.inverse_for_ops(&product_h(&lbar, &rbar, spec)?)?;
        status = rec.record(t, rel(&x, &s), || spatial_pair(&lbar, &rbar, spec));
    }
    Ok(SolverOutput {
        factors: if t == 0 { init } else { spatial_pair(&lbar, &rbar, spec)? },
        sparse: Some(s),
        history: rec.finish(status),
    })
}

// ---------------------------------------------------------------------------
// completion

/// Row rescaling `P_varsigma` of the factors: row `i` of `L` is scaled by
/// `min(1, varsigma / (sqrt(n1) ||(L * R^H)(i,:,:)||_F))`, and row `j` of `R`
/// by `min(1, varsigma / (sqrt(n2) ||(R * L^H)(j,:,:)||_F))`, both computed
/// from the input pair.
pub fn scaled_projection(f: &FactorPair, varsigma: f64, spec: &TransformSpec) -> Result<FactorPair> {
    if !(varsigma > 0.0) {
        return Err(invalid("varsigma", format!("must be positive, got {varsigma}")));
    }
    let (rows, cols) = projection_scales(&f.product(spec)?, varsigma);
    let scale = |a: &Tensor3, c: &[f64]| {
        let (n, r, n3) = a.dims();
        Tensor3::from_fn(n, r, n3, |i, j, k| c[i] * a.get(i, j, k))
    };
    Ok(FactorPair { l: scale(&f.l, &rows), r: scale(&f.r, &cols) })
}

/// Row factors for `L` and `R` of the scaled projection, from `X = L * R^H`.
fn projection_scales(x: &Tensor3, varsigma: f64) -> (Vec<f64>, Vec<f64>) {
    let (n1, n2, n3) = x.dims();
    let mut rows = alloc::vec![0.0; n1];
    let mut cols = alloc::vec![0.0; n2];
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let v = x.get(i, j, k);
                rows[i] += v * v;
                cols[j] += v * v;
            }
        }
    }
    let factor = |sq: f64, n: usize| {
        let denom = (n as f64).sqrt() * sq.sqrt();
        if denom > varsigma { varsigma / denom } else { 1.0 }
    };
    (
        rows.iter().map(|&s| factor(s, n1)).collect(),
        cols.iter().map(|&s| factor(s, n2)).collect(),
    )
}

fn project_spectral(
    lbar: &SpectralTensor,
    rbar: &SpectralTensor,
    varsigma: f64,
    spec: &TransformSpec,
) -> Result<(SpectralTensor, SpectralTensor)> {
    let x = spec.inverse_for_ops(&product_h(lbar, rbar, spec)?)?;
    let (row_scale, col_scale) = projection_scales(&x, varsigma);
    // scaling horizontal slices commutes with the mode-3 transform
    let scale = |a: &SpectralTensor, c: &[f64]| -> Result<SpectralTensor> {
        SpectralTensor::from_slices(
            a.slices()
                .iter()
                .map(|m| {
                    let mut m = m.clone();
                    for (i, &ci) in c.iter().enumerate() {
                        m.row_mut(i).iter_mut().for_each(|z| *z *= ci);
                    }
                    m
                })
                .collect(),
        )
    };
    Ok((scale(lbar, &row_scale)?, scale(rbar, &col_scale)?))
}

/// Balanced factors of the top-`r` t-SVD of `Y / p`, then the scaled
/// projection when a radius is given.
pub fn spectral_init_completion(
    y_obs: &Tensor3,
    obs: &ObservationSet,
    r: usize,
    varsigma: Option<f64>,
    spec: &TransformSpec,
) -> Result<FactorPair> {
    obs.check(y_obs, "spectral_init_completion")?;
    spec.check_n3(y_obs.dims().2, "spectral_init_completion")?;
    let (mut lbar, mut rbar) = spectral_init(&y_obs.scale(1.0 / obs.p), r, spec)?;
    if let Some(v) = varsigma {
        if !(v > 0.0) {
            return Err(invalid("varsigma", format!("must be positive, got {v}")));
        }
        (lbar, rbar) = project_spectral(&lbar, &rbar, v, spec)?;
    }
    spatial_pair(&lbar, &rbar, spec)
}

/// `P_Omega(X - Y) / p`.
fn completion_residual(x: &Tensor3, y_obs: &Tensor3, obs: &ObservationSet) -> Tensor3 {
    let inv_p = 1.0 / obs.p;
    let data: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(y_obs.as_slice())
        .zip(&obs.mask)
        .map(|((&xv, &yv), &m)| if m { (xv - yv) * inv_p } else { 0.0 })
        .collect();
    let (n1, n2, n3) = x.dims();
    Tensor3::from_vec_unchecked(n1, n2, n3, data)
}

/// One completion update, followed by the scaled projection if a radius is
/// given.
pub fn completion_step(
    f: &FactorPair,
    y_obs: &Tensor3,
    obs: &ObservationSet,
    eta: f64,
    varsigma: Option<f64>,
    spec: &TransformSpec,
) -> Result<FactorPair> {
    obs.check(y_obs, "completion_step")?;
    let (n1, n2, n3) = y_obs.dims();
    check_pair(f, n1, n2, n3, "completion_step")?;
    let (lbar, rbar) = spectral_pair(f, spec)?;
    let x = spec.inverse_for_ops(&product_h(&lbar, &rbar, spec)?)?;
    let dbar = spec.forward(&completion_residual(&x, y_obs, obs))?;
    let (mut l2, mut r2) = update_factors(&lbar, &rbar, &dbar, StepRule::Scaled(eta), spec, 0)?;
    if let Some(v) = varsigma {
        (l2, r2) = project_spectral(&l2, &r2, v, spec)?;
    }
    spatial_pair(&l2, &r2, spec)
}

/// Completion from the spectral initialization.
pub fn run_completion(
    y_obs: &Tensor3,
    obs: &ObservationSet,
    params: &SolverParams,
    spec: &TransformSpec,
    gt: Option<&GroundTruth>,
) -> Result<SolverOutput> {
    params.validate()?;
    let init = spectral_init_completion(y_obs, obs, params.rank, params.projection_radius, spec)?;
    run_completion_from(y_obs, obs, init, params, spec, gt, &NoClock)
}

pub fn run_completion_from(
    y_obs: &Tensor3,
    obs: &ObservationSet,
    init: FactorPair,
    params: &SolverParams,
    spec: &TransformSpec,
    gt: Option<&GroundTruth>,
    clock: &dyn Clock,
) -> Result<SolverOutput> {
    params.validate()?;
    obs.check(y_obs, "run_completion")?;
    let (n1, n2, n3) = y_obs.dims();
    spec.check_n3(n3, "run_completion")?;
    check_pair(&init, n1, n2, n3, "run_completion")?;
    if let Some(gt) = gt {
        y_obs.ensure_same_dims(&gt.x, "run_completion")?;
    }
    let rule = step_rule(params, gt)?;
    let y_seen = project_observed(y_obs, obs)?;
    let y_norm = y_seen.fro_norm();
    let rel = |x: &Tensor3| match gt {
        Some(gt) => rel_to(x, &gt.x),
        None => {
            let fit = (&project_observed(x, obs).unwrap_or_else(|_| x.clone()) - &y_seen).fro_norm();
            if y_norm > 0.0 { fit / y_norm } else { fit }
        }
    };

    let mut rec = Recorder::new(params, gt, clock, n1, n2);
    let (mut lbar, mut rbar) = spectral_pair(&init, spec)?;
    let mut x = spec.inverse_for_ops(&product_h(&lbar, &rbar, spec)?)?;
    let mut status = rec.record(0, rel(&x), || Ok(init.clone()));
    let mut t = 0;
    while status.is_none() && t < params.max_iters {
        let step = spec
            .forward(&completion_residual(&x, y_obs, obs))
            .and_then(|dbar| update_factors(&lbar, &rbar, &dbar, rule, spec, t))
            .and_then(|(l2, r2)| match params.projection_radius {
                Some(v) => project_spectral(&l2, &r2, v, spec),
                None => Ok((l2, r2)),
            });
        match step {
            Ok((l2, r2)) => {
                lbar = l2;
                rbar = r2;
            }
            Err(e) => {
                status = Some(RunStatus::Failed(e));
                break;
            }
        }
        t += 1;
        x = spec.inverse_for_ops(&product_h(&lbar, &rbar, spec)?)?;
        status = rec.record(t, rel(&x), || spatial_pair(&lbar, &rbar, spec));
    }
    Ok(SolverOutput {
        factors: if t == 0 { init } else { spatial_pair(&lbar, &rbar, spec)? },
        sparse: None,
        history: rec.finish(status),
    })
}

// ---------------------------------------------------------------------------
// factorization

/// One factorization update `L - eta (L*R^H - X) * R * (R^H*R)^{-1}` and its
/// mirror for `R`.
pub fn factorization_step(f: &FactorPair, xstar: &Tensor3, eta: f64, spec: &TransformSpec) -> Result<FactorPair> {
    let (n1, n2, n3) = xstar.dims();
    check_pair(f, n1, n2, n3, "factorization_step")?;
    let (lbar, rbar) = spectral_pair(f, spec)?;
    let dbar = residual_spectrum(&product_h(&lbar, &rbar, spec)?, &spec.forward(xstar)?);
    let (l2, r2) = update_factors(&lbar, &rbar, &dbar?, StepRule::Scaled(eta), spec, 0)?;
    spatial_pair(&l2, &r2, spec)
}

fn residual_spectrum(xbar: &SpectralTensor, target: &SpectralTensor) -> Result<SpectralTensor> {
    SpectralTensor::from_slices(
        xbar.slices().iter().zip(target.slices()).map(|(a, b)| a - b).collect(),
    )
}

/// Factorization of a fully known `X*` from a warm start.
pub fn run_factorization(
    xstar: &Tensor3,
    params: &SolverParams,
    f0: &FactorPair,
    spec: &TransformSpec,
    gt: Option<&GroundTruth>,
) -> Result<SolverOutput> {
    run_factorization_with_clock(xstar, params, f0, spec, gt, &NoClock)
}

pub fn run_factorization_with_clock(
    xstar: &Tensor3,
    params: &SolverParams,
    f0: &FactorPair,
    spec: &TransformSpec,
    gt: Option<&GroundTruth>,
    clock: &dyn Clock,
) -> Result<SolverOutput> {
    params.validate()?;
    let (n1, n2, n3) = xstar.dims();
    spec.check_n3(n3, "run_factorization")?;
    check_pair(f0, n1, n2, n3, "run_factorization")?;
    let ref_norm = xstar.fro_norm();
    if ref_norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let rule = step_rule(params, gt)?;
    let target = spec.forward(xstar)?;
    // Parseval: ||X - X*||_F = ||Xbar - X*bar||_F / sqrt(ell)
    let rel = |d: &SpectralTensor| d.fro_norm() / spec.ell().sqrt() / ref_norm;

    let mut rec = Recorder::new(params, gt, clock, n1, n2);
    let (mut lbar, mut rbar) = spectral_pair(f0, spec)?;
    let mut dbar = residual_spectrum(&product_h(&lbar, &rbar, spec)?, &target)?;
    let mut status = rec.record(0, rel(&dbar), || Ok(f0.clone()));
    let mut t = 0;
    while status.is_none() && t < params.max_iters {
        match update_factors(&lbar, &rbar, &dbar, rule, spec, t) {
            Ok((l2, r2)) => {
                lbar = l2;
                rbar = r2;
            }
            Err(e) => {
                status = Some(RunStatus::Failed(e));
                break;
            }
        }
        t += 1;
        dbar = residual_spectrum(&product_h(&lbar, &rbar, spec)?, &target)?;
        status = rec.record(t, rel(&dbar), || spatial_pair(&lbar, &rbar, spec));
    }
    Ok(SolverOutput {
        factors: if t == 0 { f0.clone() } else { spatial_pair(&lbar, &rbar, spec)? },
        sparse: None,
        history: rec.finish(status),
    })
}
