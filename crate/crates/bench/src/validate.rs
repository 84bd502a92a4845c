//! Seeded self-check of the library: transform round trips, t-SVD
//! reconstruction, norm inequalities, projection non-expansiveness, and
//! support containment. Every check reports its measured margin.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsvd_core::solvers::{rpca_step, scaled_projection};
use tsvd_core::synth::{gen_ground_truth, gen_sparse_corruption};
use tsvd_core::{
    conj_transpose, dist, identity_tensor, incoherence, make_custom_transform, make_transform, norm, t_product,
    t_svd, FactorPair, GroundTruth, NormKind, Tensor3, TransformKind, TransformSpec,
};

use crate::error::{Error, Result};

const KINDS: [TransformKind; 2] = [TransformKind::Dft, TransformKind::Dct];
const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    /// Result of a check that failed with an error instead of a margin.
    fn push_result(&mut self, name: &str, r: tsvd_core::Result<(bool, String)>) {
        match r {
            Ok((ok, detail)) => self.push(name, ok, detail),
            Err(e) => self.push(name, false, format!("error: {e}")),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            writeln!(s, "{} {:<36} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).unwrap();
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(s, "{} checks, {failed} failed", self.checks.len()).unwrap();
        s
    }
}

fn random_tensor(n1: usize, n2: usize, n3: usize, g: &mut ChaCha8Rng) -> Tensor3 {
    Tensor3::from_fn(n1, n2, n3, |_, _, _| g.random_range(-1.0..1.0))
}

fn rel(a: &Tensor3, b: &Tensor3) -> f64 {
    (a - b).fro_norm() / b.fro_norm().max(f64::MIN_POSITIVE)
}

fn round_trip(spec: &TransformSpec, g: &mut ChaCha8Rng) -> tsvd_core::Result<f64> {
    let a = random_tensor(g.random_range(1..7), g.random_range(1..7), spec.n3(), g);
    Ok(rel(&spec.inverse(&spec.forward(&a)?)?, &a))
}

fn check_round_trips(g: &mut ChaCha8Rng) -> tsvd_core::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for kind in KINDS {
        for n3 in [1, 2, 3, 5, 8, 16] {
            let spec = make_transform(kind, n3)?;
            for _ in 0..5 {
                worst = worst.max(round_trip(&spec, g)?);
            }
        }
    }
    Ok((worst <= EXACT_TOL, format!("max rel error {worst:.2e} (limit {EXACT_TOL:.0e})")))
}

fn check_tsvd(g: &mut ChaCha8Rng) -> tsvd_core::Result<(bool, String)> {
    let (mut recon, mut orth) = (0.0f64, 0.0f64);
    for kind in KINDS {
        for _ in 0..20 {
            let spec = make_transform(kind, g.random_range(1..6))?;
            let a = random_tensor(g.random_range(1..8), g.random_range(1..8), spec.n3(), g);
            let f = t_svd(&a, &spec)?;
            recon = recon.max(rel(&f.reconstruct(&spec)?, &a));
            let id = identity_tensor(f.rank(), &spec)?;
            let uu = t_product(&conj_transpose(&f.u, &spec)?, &f.u, &spec)?;
            let vv = t_product(&conj_transpose(&f.v, &spec)?, &f.v, &spec)?;
            orth = orth.max((&uu - &id).max_abs()).max((&vv - &id).max_abs());
        }
    }
    Ok((
        recon <= EXACT_TOL && orth <= EXACT_TOL,
        format!("reconstruction {recon:.2e}, orthogonality {orth:.2e} (limit {EXACT_TOL:.0e})"),
    ))
}

fn two_inf(t: &Tensor3, s: &TransformSpec) -> tsvd_core::Result<f64> {
    norm(t, NormKind::TwoInf, s)
}

/// `(small, big)` pairs of the product inequalities on one random instance.
fn inequality_instance(kind: TransformKind, g: &mut ChaCha8Rng) -> tsvd_core::Result<Vec<(f64, f64)>> {
    let s = make_transform(kind, g.random_range(1..5))?;
    let n3 = s.n3();
    let m = g.random_range(2..5);
    let a = random_tensor(g.random_range(1..6), m, n3, g);
    let b = &random_tensor(m, m, n3, g) + &identity_tensor(m, &s)?.scale(2.0);
    let c = random_tensor(g.random_range(1..6), m, n3, g);
    let ab = t_product(&a, &b, &s)?;
    let sv = t_svd(&b, &s)?.transformed_singular_values(&s)?;
    let lo = sv.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = norm(&b, NormKind::Spectral, &s)?;
    let ac_h = t_product(&a, &conj_transpose(&c, &s)?, &s)?;
    Ok(vec![
        (a.fro_norm() * lo, ab.fro_norm()),
        (ab.fro_norm(), a.fro_norm() * hi),
        (two_inf(&a, &s)? * lo, two_inf(&ab, &s)?),
        (two_inf(&ab, &s)?, two_inf(&a, &s)? * hi),
        (ac_h.max_abs(), s.ell().sqrt() * two_inf(&a, &s)? * two_inf(&c, &s)?),
        (two_inf(&ab, &s)?, (m as f64 * s.ell()).sqrt() * two_inf(&a, &s)? * two_inf(&b, &s)?),
    ])
}

fn check_inequalities(g: &mut ChaCha8Rng) -> tsvd_core::Result<(bool, String)> {
    let mut min_slack = f64::INFINITY;
    let mut count = 0;
    for kind in KINDS {
        for _ in 0..50 {
            for (small, big) in inequality_instance(kind, g)? {
                min_slack = min_slack.min((big - small) / big.abs().max(f64::MIN_POSITIVE));
                count += 1;
            }
        }
    }
    Ok((min_slack >= 0.0, format!("{count} inequalities, min relative slack {min_slack:.2e}")))
}

/// Ground-truth factors whose largest rows are grown until just inside
/// distance `bound`, so that the projection is active.
fn inflated_rows(gt: &GroundTruth, bound: f64, g: &mut ChaCha8Rng) -> tsvd_core::Result<FactorPair> {
    let widest = |t: &Tensor3| {
        (0..t.dims().0)
            .map(|i| (t.horizontal_slice(i).fro_norm(), i))
            .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
            .1
    };
    let (il, ir) = (widest(&gt.l), widest(&gt.r));
    let (n1, r, n3) = gt.l.dims();
    let (el, er) = (random_tensor(n1, r, n3, g), random_tensor(gt.r.dims().0, r, n3, g));
    let mut gamma = 0.5;
    for _ in 0..200 {
        let grow = |t: &Tensor3, row: usize| {
            let (n, r, n3) = t.dims();
            Tensor3::from_fn(n, r, n3, |i, j, k| t.get(i, j, k) * if i == row { 1.0 + gamma } else { 1.0 })
        };
        let f = FactorPair::new(grow(&gt.l, il).axpy(1e-3 * gamma, &el), grow(&gt.r, ir).axpy(1e-3 * gamma, &er))?;
        if dist(&f, gt)? <= bound {
            return Ok(f);
        }
        gamma *= 0.9;
    }
    Ok(gt.factors())
}

fn check_projection(g: &mut ChaCha8Rng, trials: usize) -> tsvd_core::Result<(bool, String)> {
    let eps = 0.02;
    let (mut active, mut failures) = (0, 0);
    let mut worst = f64::NEG_INFINITY;
    for t in 0..trials {
        let kind = KINDS[t % 2];
        let spec = make_transform(kind, g.random_range(2..4))?;
        let gt = gen_ground_truth(40, 30, spec.n3(), 2, 1.0, &spec, g.random())?;
        let (sigma1, sigma_min, _) = gt.singular_extremes()?;
        let ell = spec.ell();
        let f = inflated_rows(&gt, eps * sigma_min / ell.sqrt(), g)?;
        let varsigma =
            (1.0 + eps) * (incoherence(&gt) * gt.mrank.s_r as f64 / (spec.n3() as f64 * ell)).sqrt() * sigma1;
        let p = scaled_projection(&f, varsigma, &spec)?;
        active += (p != f) as usize;
        let (d0, d1) = (dist(&f, &gt)?, dist(&p, &gt)?);
        worst = worst.max((d1 - d0) / d0);
        failures += (d1 > d0) as usize;
    }
    Ok((
        failures == 0,
        format!("{trials} trials ({active} active), {failures} expansions, max rel change {worst:.2e}"),
    ))
}

fn check_support(g: &mut ChaCha8Rng, trials: usize) -> tsvd_core::Result<(bool, String)> {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for t in 0..trials {
        let spec = make_transform(KINDS[t % 2], g.random_range(2..5))?;
        let gt = gen_ground_truth(12, 10, spec.n3(), 2, g.random_range(1.0..10.0), &spec, g.random())?;
        let s_star = gen_sparse_corruption(&gt.x, g.random_range(0.02..0.2), g.random())?;
        let y = &gt.x + &s_star;
        let delta = 10f64.powf(g.random_range(-4.0..-1.0));
        let f0 = gt.factors();
        let (n1, r, n3) = f0.l.dims();
        let f = FactorPair::new(
            f0.l.axpy(delta, &random_tensor(n1, r, n3, g)),
            f0.r.axpy(delta, &random_tensor(f0.r.dims().0, r, n3, g)),
        )?;
        let zeta = (&gt.x - &f.product(&spec)?).max_abs() * g.random_range(1.0..2.0);
        let (_, s) = rpca_step(&f, &y, zeta, 0.5, &spec)?;
        let bad = s.as_slice().iter().zip(s_star.as_slice()).any(|(&a, &b)| {
            worst = worst.max((a - b).abs() / (2.0 * zeta));
            (a != 0.0 && b == 0.0) || (a - b).abs() > 2.0 * zeta
        });
        failures += bad as usize;
    }
    Ok((failures == 0, format!("{trials} trials, {failures} failures, max |S - S*| / 2 zeta {worst:.3}")))
}

fn check_custom(phi: DMatrix<Complex64>, g: &mut ChaCha8Rng) -> tsvd_core::Result<(bool, String)> {
    let spec = make_custom_transform(phi)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        worst = worst.max(round_trip(&spec, g)?);
    }
    Ok((
        worst <= EXACT_TOL,
        format!("ell {:.6}, max round-trip error {worst:.2e} (limit {EXACT_TOL:.0e})", spec.ell()),
    ))
}

/// Reads a real square matrix, one row per line, comma separated.
pub fn read_phi(path: &Path) -> Result<DMatrix<Complex64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::config(path.display().to_string(), format!("row {}: {e}", rows.len())))?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config(path.display().to_string(), "transform matrix must be square and non-empty"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0)))
}

/// Runs the suite with a fixed seed, plus the custom transform when given.
pub fn validate_suite(seed: u64, phi: Option<DMatrix<Complex64>>) -> Report {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::default();
    report.push_result("transform round trip", check_round_trips(&mut g));
    report.push_result("t-SVD reconstruction", check_tsvd(&mut g));
    report.push_result("norm inequalities", check_inequalities(&mut g));
    report.push_result("projection non-expansiveness", check_projection(&mut g, 20));
    report.push_result("sparse support containment", check_support(&mut g, 40));
    if let Some(phi) = phi {
        report.push_result("custom transform", check_custom(phi, &mut g));
    }
    report
}
