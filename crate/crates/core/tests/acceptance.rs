//! Acceptance criteria. Each test prints one PASS/FAIL line with the
//! measured margins, then asserts.

mod common;

use std::io::Write;
use std::time::Instant;

use common::{lemmas, random_tensor, rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tsvd_core::solvers::{
    project_observed, run_completion_from, run_factorization, run_rpca, scaled_projection,
    spectral_init_completion,
};
use tsvd_core::synth::{add_gaussian_noise, gen_bernoulli_mask, gen_ground_truth, gen_sparse_corruption};
use tsvd_core::*;

const KINDS: [TransformKind; 2] = [TransformKind::Dft, TransformKind::Dct];
const KAPPAS: [f64; 4] = [1.0, 5.0, 10.0, 20.0];

/// Desk scale for the recovery experiments (n1 = n2 = n3 = N).
const N: usize = 50;
const R: usize = 5;

fn report(criterion: u32, ok: bool, detail: String) {
    // written past the test harness capture so the summary always shows
    let line = format!("criterion {criterion}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn spread(counts: &[usize]) -> f64 {
    let hi = *counts.iter().max().unwrap() as f64;
    let lo = *counts.iter().min().unwrap() as f64;
    (hi - lo) / lo
}

#[test]
fn criterion_1_algebra_matches_block_diagonal_oracle() {
    let start = Instant::now();
    let mut g = rng(101);
    let mut worst = 0.0f64;
    let mut worst_op = "";
    let mut note = |op: &'static str, e: f64| {
        if !(e <= worst) {
            worst = e;
            worst_op = op;
        }
    };
    for kind in KINDS {
        for _ in 0..50 {
            let (n1, n2, n3) = (g.random_range(1..=6), g.random_range(1..=6), g.random_range(1..=4));
            let m = g.random_range(1..=6);
            let s = make_transform(kind, n3).unwrap();
            let a = random_tensor(n1, n2, n3, &mut g);
            let b = random_tensor(n2, m, n3, &mut g);
            note("t_product", common::rel(&t_product(&a, &b, &s).unwrap(), &common::t_product(&a, &b, kind)));
            note(
                "conj_transpose",
                common::rel(&conj_transpose(&a, &s).unwrap(), &common::conj_transpose(&a, kind)),
            );

            let f = t_svd(&a, &s).unwrap();
            note("t_svd reconstruction", common::rel(&f.reconstruct(&s).unwrap(), &a));
            let mut sv: Vec<f64> = f.transformed_singular_values(&s).unwrap().concat();
            sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
            let oracle_sv = common::bdiag_singular_values(&a, kind);
            note("t_svd singular values", rel_vec(&sv, &oracle_sv[..sv.len()]));

            let sq = &random_tensor(n1, n1, n3, &mut g) + &identity_tensor(n1, &s).unwrap().scale(3.0);
            note("t_inverse", common::rel(&t_inverse(&sq, &s).unwrap(), &common::t_inverse(&sq, kind)));

            let spectral = norm(&a, NormKind::Spectral, &s).unwrap();
            note("spectral norm", common::rel_scalar(spectral, common::spectral_norm(&a, kind)));
            let nuclear = norm(&a, NormKind::Nuclear, &s).unwrap();
            note("nuclear norm", common::rel_scalar(nuclear, common::nuclear_norm(&a, kind)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst <= 1e-9 && secs < 10.0,
        format!("max rel err {worst:.2e} ({worst_op}) <= 1e-9; {secs:.2}s < 10s"),
    );
}

#[test]
fn criterion_2_transform_identities() {
    let mut g = rng(102);
    let mut worst = 0.0f64;
    let mut ell_exact = true;
    for kind in KINDS {
        for _ in 0..100 {
            let (n1, n2, n3) = (g.random_range(1..=6), g.random_range(1..=6), g.random_range(1..=8));
            let s = make_transform(kind, n3).unwrap();
            ell_exact &= s.ell() == if kind == TransformKind::Dft { n3 as f64 } else { 1.0 };
            let a = random_tensor(n1, n2, n3, &mut g);
            let b = random_tensor(n1, n2, n3, &mut g);
            let (abar, bbar) = (s.forward(&a).unwrap(), s.forward(&b).unwrap());
            let sq = s.ell().sqrt();
            worst = worst.max(common::rel_scalar(abar.fro_norm() / sq, a.fro_norm()));
            let bd = common::bdiag(abar.slices());
            worst = worst.max(common::rel_scalar(bd.norm() / sq, a.fro_norm()));
            let inner = abar.inner(&bbar);
            let direct = a.dot(&b);
            worst = worst.max((inner.re / s.ell() - direct).abs() / (a.fro_norm() * b.fro_norm()));
            worst = worst.max(inner.im.abs() / (s.ell() * a.fro_norm() * b.fro_norm()));
        }
    }
    report(
        2,
        worst <= 1e-10 && ell_exact,
        format!("max rel err {worst:.2e} <= 1e-10; ell exact (DFT n3, DCT 1): {ell_exact}"),
    );
}

#[test]
fn criterion_3_norm_inequalities() {
    let mut g = rng(103);
    let mut bounds = Vec::new();
    for kind in KINDS {
        for trial in 0..100 {
            bounds.extend(lemmas::sparse_bounds(kind, trial, &mut g));
            bounds.push(lemmas::infnorm_bound(kind, &mut g));
            bounds.extend(lemmas::sandwich_bounds(kind, &mut g));
            bounds.push(lemmas::row_product_bound(kind, &mut g));
        }
    }
    let min_slack = bounds.iter().map(|b| b.slack()).fold(f64::INFINITY, f64::min);

    let c = (2f64.sqrt() + 1.0).sqrt();
    let mut dist_slack = f64::INFINITY;
    for trial in 0..50 {
        let kind = KINDS[trial % 2];
        let n3 = g.random_range(2..=4);
        let r = g.random_range(1..=3);
        let spec = make_transform(kind, n3).unwrap();
        let gt = gen_ground_truth(8, 7, n3, r, g.random_range(1.0..20.0), &spec, trial as u64).unwrap();
        let f = perturb(&gt.factors(), 10f64.powf(g.random_range(-3.0..-1.0)), &mut g);
        let d = dist(&f, &gt).unwrap();
        let rhs = c * (&f.product(&spec).unwrap() - &gt.x).fro_norm();
        dist_slack = dist_slack.min((rhs - d) / rhs);
    }
    report(
        3,
        min_slack >= 0.0 && dist_slack >= 0.0,
        format!(
            "{} norm inequalities, min rel slack {min_slack:.2e}; 50 distance bounds, min rel slack {dist_slack:.2e}",
            bounds.len()
        ),
    );
}

fn perturb(f: &FactorPair, delta: f64, g: &mut ChaCha8Rng) -> FactorPair {
    let (n1, r, n3) = f.l.dims();
    let n2 = f.r.dims().0;
    FactorPair::new(
        f.l.axpy(delta, &random_tensor(n1, r, n3, g)),
        f.r.axpy(delta, &random_tensor(n2, r, n3, g)),
    )
    .unwrap()
}

/// A random perturbation of the ground-truth factors at distance close to
/// (and not above) `target`.
fn at_distance(gt: &GroundTruth, target: f64, g: &mut ChaCha8Rng) -> FactorPair {
    let (n1, r, n3) = gt.l.dims();
    let n2 = gt.r.dims().0;
    let el = random_tensor(n1, r, n3, g);
    let er = random_tensor(n2, r, n3, g);
    let at = |delta: f64| {
        let f = FactorPair::new(gt.l.axpy(delta, &el), gt.r.axpy(delta, &er)).unwrap();
        let d = dist(&f, gt).unwrap();
        (f, d)
    };
    let (_, d1) = at(1e-3);
    let mut delta = 1e-3 * target / d1;
    loop {
        let (f, d) = at(delta);
        if d <= target {
            return f;
        }
        delta *= 0.99 * target / d;
    }
}

#[test]
fn criterion_4_factorization_contraction() {
    let start = Instant::now();
    let n = 20;
    let mut details = Vec::new();
    let mut ok = true;
    for kind in KINDS {
        let spec = make_transform(kind, n).unwrap();
        let gt = gen_ground_truth(n, n, n, 3, 50.0, &spec, 4).unwrap();
        let (_, sigma_min, _) = gt.singular_extremes().unwrap();
        let bound = 0.1 * sigma_min / spec.ell().sqrt();
        let f0 = at_distance(&gt, 0.99 * bound, &mut rng(104));
        let mut params = SolverParams::new(3);
        params.eta = 0.5;
        params.max_iters = 30;
        params.rel_tol = 0.0;
        let out = run_factorization(&gt.x, &params, &f0, &spec, Some(&gt)).unwrap();
        let d: Vec<f64> = out.history.records.iter().map(|r| r.dist.unwrap()).collect();
        let worst = d.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        ok &= d.len() == 31 && worst <= 0.67;
        details.push(format!("{}: dist0 {:.2e} (bound {bound:.2e}), max ratio {worst:.4}", kind.name(), d[0]));
    }
    let secs = start.elapsed().as_secs_f64();
    report(4, ok && secs < 30.0, format!("{}; limit 0.67; {secs:.1}s < 30s", details.join("; ")));
}

fn rpca_instance(kind: TransformKind, kappa: f64) -> (TransformSpec, GroundTruth, Tensor3) {
    let spec = make_transform(kind, N).unwrap();
    let gt = gen_ground_truth(N, N, N, R, kappa, &spec, 1).unwrap();
    let s = gen_sparse_corruption(&gt.x, 0.1, 2).unwrap();
    let y = &gt.x + &s;
    (spec, gt, y)
}

#[test]
fn criterion_5_rpca_condition_number_independence() {
    let start = Instant::now();
    let sched = ThresholdSchedule::new(0.5, 0.5, 0.95).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for kind in KINDS {
        let mut counts = Vec::new();
        let mut shown = Vec::new();
        for kappa in KAPPAS {
            let (spec, gt, y) = rpca_instance(kind, kappa);
            let mut params = SolverParams::new(R);
            params.eta = 0.5;
            // run past the budget so the report shows where 1e-8 is reached
            params.max_iters = 600;
            params.rel_tol = 1e-8;
            let out = run_rpca(&y, &params, &sched, &spec, Some(&gt)).unwrap();
            let count = out.history.iterations_to(1e-8);
            let at150 = out.history.records.get(150).map_or(f64::NAN, |r| r.rel_err);
            shown.push(format!("k{kappa}: {count:?} (err@150 {at150:.1e})"));
            ok &= count.is_some_and(|c| c <= 150);
            counts.push(count.unwrap_or(usize::MAX / 2));
        }
        let sp = spread(&counts);
        ok &= sp <= 0.25;

        let (spec, gt, y) = rpca_instance(kind, 20.0);
        let mut params = SolverParams::new(R);
        params.method = Method::VanillaGd;
        params.max_iters = 150;
        params.rel_tol = 0.0;
        let van = run_rpca(&y, &params, &sched, &spec, Some(&gt)).unwrap();
        let vfinal = van.history.final_rel_err();
        ok &= vfinal > 1e-4;
        details.push(format!(
            "{}: ScaledGD iters to 1e-8 [{}], spread {sp:.2}; GD k20 err@150 {vfinal:.1e}",
            kind.name(),
            shown.join(", ")
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        ok,
        format!("n={N} r={R}; {}; need <=150, spread <=0.25, GD >1e-4; {secs:.0}s", details.join("; ")),
    );
}

struct CompletionInstance {
    spec: TransformSpec,
    gt: GroundTruth,
    obs: ObservationSet,
    y: Tensor3,
    init: FactorPair,
}

fn completion_instance(kind: TransformKind, kappa: f64, snr_db: f64) -> CompletionInstance {
    let spec = make_transform(kind, N).unwrap();
    let gt = gen_ground_truth(N, N, N, R, kappa, &spec, 1).unwrap();
    let obs = gen_bernoulli_mask(N, N, N, 0.4, 3).unwrap();
    let noisy = add_gaussian_noise(&gt.x, snr_db, 4).unwrap();
    let y = project_observed(&noisy, &obs).unwrap();
    let init = spectral_init_completion(&y, &obs, R, None, &spec).unwrap();
    CompletionInstance { spec, gt, obs, y, init }
}

impl CompletionInstance {
    fn run(&self, method: Method, eta: f64, iters: usize, rel_tol: f64) -> RunHistory {
        let mut params = SolverParams::new(R);
        params.method = method;
        params.eta = eta;
        params.max_iters = iters;
        params.rel_tol = rel_tol;
        run_completion_from(&self.y, &self.obs, self.init.clone(), &params, &self.spec, Some(&self.gt), &NoClock)
            .unwrap()
            .history
    }
}

#[test]
fn criterion_6_completion_condition_number_independence() {
    let start = Instant::now();
    let mut counts = Vec::new();
    for kappa in KAPPAS {
        let inst = completion_instance(TransformKind::Dft, kappa, f64::INFINITY);
        let h = inst.run(Method::ScaledGd, 0.5, 1000, 1e-8);
        counts.push(h.iterations_to(1e-8));
    }
    let scaled_ok = counts.iter().all(Option::is_some);
    let scaled: Vec<usize> = counts.iter().map(|c| c.unwrap_or(usize::MAX / 2)).collect();
    let sp = spread(&scaled);

    let one = completion_instance(TransformKind::Dft, 1.0, f64::INFINITY).run(Method::VanillaGd, 0.5, 1000, 1e-8);
    let c1 = one.iterations_to(1e-8);
    let (gd_ok, gd_detail) = match c1 {
        Some(c1) => {
            // the kappa = 20 run only needs to get past 3 * c1
            let twenty =
                completion_instance(TransformKind::Dft, 20.0, f64::INFINITY).run(Method::VanillaGd, 0.5, 3 * c1, 1e-8);
            let c20 = twenty.iterations_to(1e-8);
            let ok = c20.is_none_or(|c| c >= 3 * c1);
            let shown = c20.map_or(format!("> {} (err {:.1e})", 3 * c1, twenty.final_rel_err()), |c| c.to_string());
            (ok, format!("GD iters k1 {c1}, k20 {shown}"))
        }
        None => (false, "GD k1 never reached 1e-8".into()),
    };
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        scaled_ok && sp <= 0.25 && gd_ok,
        format!("n={N} r={R} p=0.4; ScaledGD iters to 1e-8 {counts:?}, spread {sp:.2} <= 0.25; {gd_detail}; {secs:.0}s"),
    );
}

#[test]
fn criterion_7_step_size_sweep() {
    let start = Instant::now();
    let inst = completion_instance(TransformKind::Dft, 10.0, f64::INFINITY);
    let etas: Vec<f64> = (1..=12).map(|i| i as f64 / 10.0).collect();
    let mut scaled = Vec::new();
    let mut vanilla = Vec::new();
    for &eta in &etas {
        let h = inst.run(Method::ScaledGd, eta, 300, 0.0);
        scaled.push((h.final_rel_err(), h.status));
        let h = inst.run(Method::VanillaGd, eta, 300, 0.0);
        vanilla.push((h.final_rel_err(), h.status));
    }
    let (best_eta, best) = etas
        .iter()
        .zip(&vanilla)
        .filter(|(_, (_, st))| *st != RunStatus::Diverged)
        .map(|(e, (v, _))| (*e, *v))
        .fold((f64::NAN, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let wins = scaled
        .iter()
        .filter(|(v, st)| *st != RunStatus::Diverged && *v <= best)
        .count();
    let row: Vec<String> = etas
        .iter()
        .zip(&scaled)
        .map(|(e, (v, st))| if *st == RunStatus::Diverged { format!("{e:.1}:div") } else { format!("{e:.1}:{v:.0e}") })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    report(
        7,
        wins >= 10,
        format!(
            "kappa=10; GD best {best:.2e} at eta {best_eta:.1}; ScaledGD at or below it at {wins}/12 (need 10) [{}]; {secs:.0}s",
            row.join(" ")
        ),
    );
}

/// First iteration within 5% of the error floor, the floor being the
/// smallest error over the last 50 iterations.
fn plateau(h: &RunHistory) -> (f64, usize) {
    let e: Vec<f64> = h.records.iter().map(|r| r.rel_err).collect();
    let floor = e[e.len() - 50..].iter().copied().fold(f64::INFINITY, f64::min);
    let t = e.iter().position(|&v| v <= 1.05 * floor).unwrap();
    (floor, t)
}

#[test]
fn criterion_8_noisy_floors() {
    let start = Instant::now();
    let mut floors = Vec::new();
    let mut iters = Vec::new();
    for snr in [40.0, 60.0, 80.0] {
        let inst = completion_instance(TransformKind::Dft, 10.0, snr);
        let (floor, t) = plateau(&inst.run(Method::ScaledGd, 0.5, 300, 0.0));
        floors.push(floor);
        iters.push(t);
    }
    let ordered = floors.windows(2).all(|w| w[1] < w[0]);
    let sp = spread(&iters);
    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        ordered && sp <= 0.2,
        format!(
            "kappa=10, SNR 40/60/80 dB: floors {:.2e}/{:.2e}/{:.2e} strictly decreasing: {ordered}; \
             iters to plateau {iters:?}, spread {sp:.2} <= 0.2; {secs:.0}s",
            floors[0], floors[1], floors[2]
        ),
    );
}

/// Ground-truth factors with their largest rows inflated as far as a
/// distance of `bound` allows, plus a small random perturbation.
fn inflated_rows(gt: &GroundTruth, bound: f64, g: &mut ChaCha8Rng) -> FactorPair {
    let widest = |t: &Tensor3| {
        (0..t.dims().0)
            .map(|i| (t.horizontal_slice(i).fro_norm(), i))
            .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
            .1
    };
    let (il, ir) = (widest(&gt.l), widest(&gt.r));
    let (n1, r, n3) = gt.l.dims();
    let n2 = gt.r.dims().0;
    let (el, er) = (random_tensor(n1, r, n3, g), random_tensor(n2, r, n3, g));
    let mut gamma = 0.5;
    loop {
        let grow = |t: &Tensor3, row: usize| {
            let (n, r, n3) = t.dims();
            Tensor3::from_fn(n, r, n3, |i, j, k| t.get(i, j, k) * if i == row { 1.0 + gamma } else { 1.0 })
        };
        let noise = 1e-3 * gamma;
        let f = FactorPair::new(grow(&gt.l, il).axpy(noise, &el), grow(&gt.r, ir).axpy(noise, &er)).unwrap();
        if dist(&f, gt).unwrap() <= bound {
            return f;
        }
        gamma *= 0.9;
    }
}

#[test]
fn criterion_9_support_and_projection() {
    let mut support_fail = 0;
    let mut worst_ratio = 0.0f64;
    for seed in 0..100u64 {
        let mut g = rng(900 + seed);
        let kind = KINDS[(seed % 2) as usize];
        let n3 = g.random_range(2..=4);
        let spec = make_transform(kind, n3).unwrap();
        let gt = gen_ground_truth(12, 10, n3, 2, g.random_range(1.0..10.0), &spec, seed).unwrap();
        let s_star = gen_sparse_corruption(&gt.x, g.random_range(0.02..0.2), seed + 1).unwrap();
        let y = &gt.x + &s_star;
        let f = perturb(&gt.factors(), 10f64.powf(g.random_range(-4.0..-1.0)), &mut g);
        let xt = f.product(&spec).unwrap();
        let zeta = (&gt.x - &xt).max_abs() * g.random_range(1.0..2.0);
        let (_, s) = solvers::rpca_step(&f, &y, zeta, 0.5, &spec).unwrap();
        let bad = s.as_slice().iter().zip(s_star.as_slice()).any(|(&a, &b)| {
            worst_ratio = worst_ratio.max((a - b).abs() / (2.0 * zeta));
            (a != 0.0 && b == 0.0) || (a - b).abs() > 2.0 * zeta
        });
        support_fail += bad as usize;
    }

    let eps = 0.02;
    let mut expand_fail = 0;
    let mut active = 0;
    let mut worst_change = f64::NEG_INFINITY;
    for seed in 0..100u64 {
        let mut g = rng(1900 + seed);
        let kind = KINDS[(seed % 2) as usize];
        let n3 = g.random_range(2..=3);
        let spec = make_transform(kind, n3).unwrap();
        // kappa = 1 makes the radius tight at the largest rows of L* and R*
        let gt = gen_ground_truth(40, 30, n3, 2, 1.0, &spec, seed).unwrap();
        let (sigma1, sigma_min, _) = gt.singular_extremes().unwrap();
        let ell = spec.ell();
        let bound = eps * sigma_min / ell.sqrt();
        let f = inflated_rows(&gt, bound, &mut g);
        let mu = incoherence(&gt);
        let varsigma = (1.0 + eps) * (mu * gt.mrank.s_r as f64 / (n3 as f64 * ell)).sqrt() * sigma1;
        let p = scaled_projection(&f, varsigma, &spec).unwrap();
        active += (p != f) as usize;
        let (d0, d1) = (dist(&f, &gt).unwrap(), dist(&p, &gt).unwrap());
        worst_change = worst_change.max((d1 - d0) / d0);
        expand_fail += (d1 > d0) as usize;
    }
    report(
        9,
        support_fail == 0 && expand_fail == 0,
        format!(
            "support containment 100 trials, {support_fail} failures (max |S-S*|/2zeta {worst_ratio:.2}); \
             non-expansiveness 100 trials ({active} with active rows), {expand_fail} failures \
             (max rel change {worst_change:.1e})"
        ),
    );
}
