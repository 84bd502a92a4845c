//! Experiment orchestration: one synthetic instance per (transform, kappa,
//! seed, snr), then one solver run per (eta, method) on that instance, all
//! starting from the same initialization.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tsvd_core::solvers::{
    project_observed, run_completion_from, run_factorization_with_clock, run_rpca_from, spectral_init_completion,
    spectral_init_rpca, Clock,
};
use tsvd_core::synth::{add_gaussian_noise, derive_seed, gen_bernoulli_mask, gen_ground_truth, gen_sparse_corruption};
use tsvd_core::{
    make_transform, FactorPair, GroundTruth, Method, NoClock, ObservationSet, RunHistory, RunStatus, SolverParams,
    Tensor3, TransformKind,
};

use crate::config::{ExperimentConfig, Problem};

/// Seed streams split off each configured seed.
const STREAM_TRUTH: u64 = 1;
const STREAM_SPARSE: u64 = 2;
const STREAM_MASK: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_INIT: u64 = 5;

/// Threshold reported in the summary as iterations-to-threshold.
pub const SUMMARY_THRESHOLD: f64 = 1e-10;

/// Monotonic clock started when the run starts.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed_s(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceKey {
    pub transform: TransformKind,
    pub kappa: f64,
    pub seed: u64,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub instance: InstanceKey,
    pub eta: f64,
    pub method: Method,
}

impl CellKey {
    pub fn run_id(&self, problem: Problem) -> String {
        let i = &self.instance;
        let snr = i.snr_db.map(|s| format!("-snr{s}")).unwrap_or_default();
        format!(
            "{}-{}-k{}-s{}-e{}{snr}-{}",
            problem.name(),
            i.transform.name(),
            i.kappa,
            i.seed,
            self.eta,
            self.method.name()
        )
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub run_id: String,
    pub key: CellKey,
    /// `None` when the instance could not be built.
    pub history: Option<RunHistory>,
    /// Failure message, from data generation or from the solver.
    pub error: Option<String>,
}

impl CellResult {
    pub fn status(&self) -> &'static str {
        match &self.history {
            None => "failed",
            Some(h) => match h.status {
                RunStatus::Converged => "converged",
                RunStatus::MaxIters => "max_iters",
                RunStatus::Diverged => "diverged",
                RunStatus::Failed(_) => "failed",
            },
        }
    }

    /// Diverged or failed.
    pub fn is_bad(&self) -> bool {
        matches!(self.status(), "diverged" | "failed")
    }
}

/// Synthetic data and the shared starting point of every cell of an instance.
struct Instance {
    spec: tsvd_core::TransformSpec,
    gt: GroundTruth,
    data: Data,
    init: FactorPair,
}

enum Data {
    Rpca(Tensor3),
    Completion(Tensor3, ObservationSet),
    Factorization(Tensor3),
}

fn perturbed(f: &FactorPair, delta: f64, seed: u64) -> tsvd_core::Result<FactorPair> {
    if delta == 0.0 {
        return Ok(f.clone());
    }
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let mut bump = |t: &Tensor3| {
        let (a, b, c) = t.dims();
        let e = Tensor3::from_fn(a, b, c, |_, _, _| g.random_range(-1.0..1.0));
        t.axpy(delta * t.fro_norm() / e.fro_norm().max(f64::MIN_POSITIVE), &e)
    };
    let (l, r) = (bump(&f.l), bump(&f.r));
    FactorPair::new(l, r)
}

fn build(cfg: &ExperimentConfig, key: &InstanceKey) -> tsvd_core::Result<Instance> {
    let (n1, n2, n3) = cfg.dims;
    let spec = make_transform(key.transform, n3)?;
    let gt = gen_ground_truth(n1, n2, n3, cfg.rank, key.kappa, &spec, derive_seed(key.seed, STREAM_TRUTH))?;
    let noisy = match key.snr_db {
        Some(snr) => add_gaussian_noise(&gt.x, snr, derive_seed(key.seed, STREAM_NOISE))?,
        None => gt.x.clone(),
    };
    let (data, init) = match cfg.problem {
        Problem::Rpca => {
            let s = gen_sparse_corruption(&gt.x, cfg.alpha, derive_seed(key.seed, STREAM_SPARSE))?;
            let y = &noisy + &s;
            let (init, _) = spectral_init_rpca(&y, cfg.rank, cfg.schedule.zeta0, &spec)?;
            (Data::Rpca(y), init)
        }
        Problem::Completion => {
            let obs = gen_bernoulli_mask(n1, n2, n3, cfg.p, derive_seed(key.seed, STREAM_MASK))?;
            let y = project_observed(&noisy, &obs)?;
            let init = spectral_init_completion(&y, &obs, cfg.rank, cfg.varsigma, &spec)?;
            (Data::Completion(y, obs), init)
        }
        Problem::Factorization => {
            let init = perturbed(&gt.factors(), cfg.init_perturbation, derive_seed(key.seed, STREAM_INIT))?;
            (Data::Factorization(noisy), init)
        }
    };
    Ok(Instance { spec, gt, data, init })
}

/// Tensors of one instance, named for the `gen` subcommand: the ground
/// truth, the data handed to the solver, and the mask (as 0/1) or the
/// corruption `Y - X*` where the problem has one.
pub fn instance_tensors(cfg: &ExperimentConfig, key: &InstanceKey) -> tsvd_core::Result<Vec<(&'static str, Tensor3)>> {
    let inst = build(cfg, key)?;
    let mut out = vec![("truth", inst.gt.x.clone())];
    match inst.data {
        Data::Rpca(y) => {
            let corruption = &y - &inst.gt.x;
            out.push(("observed", y));
            out.push(("corruption", corruption));
        }
        Data::Completion(y, obs) => {
            let (n1, n2, n3) = obs.dims();
            let mask = obs.mask().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
            out.push(("observed", y));
            out.push(("mask", Tensor3::from_vec(n1, n2, n3, mask)?));
        }
        Data::Factorization(x) => out.push(("observed", x)),
    }
    Ok(out)
}

impl InstanceKey {
    pub fn name(&self, problem: Problem) -> String {
        let snr = self.snr_db.map(|s| format!("-snr{s}")).unwrap_or_default();
        format!("{}-{}-k{}-s{}{snr}", problem.name(), self.transform.name(), self.kappa, self.seed)
    }
}

fn run_cell(cfg: &ExperimentConfig, inst: &Instance, key: &CellKey, timing: bool) -> tsvd_core::Result<RunHistory> {
    let mut params = SolverParams::new(cfg.rank);
    params.eta = key.eta;
    params.max_iters = cfg.max_iters;
    params.rel_tol = cfg.rel_tol;
    params.method = key.method;
    params.projection_radius = cfg.varsigma;
    let wall;
    let clock: &dyn Clock = if timing {
        wall = WallClock::start();
        &wall
    } else {
        &NoClock
    };
    let gt = Some(&inst.gt);
    let init = inst.init.clone();
    let out = match &inst.data {
        Data::Rpca(y) => run_rpca_from(y, init, &params, &cfg.schedule, &inst.spec, gt, clock)?,
        Data::Completion(y, obs) => run_completion_from(y, obs, init, &params, &inst.spec, gt, clock)?,
        Data::Factorization(x) => run_factorization_with_clock(x, &params, &init, &inst.spec, gt, clock)?,
    };
    Ok(out.history)
}

pub fn instance_keys(cfg: &ExperimentConfig) -> Vec<InstanceKey> {
    let snrs: Vec<Option<f64>> =
        if cfg.snr_db.is_empty() { vec![None] } else { cfg.snr_db.iter().copied().map(Some).collect() };
    let mut keys = Vec::new();
    for &transform in &cfg.transforms {
        for &kappa in &cfg.kappas {
            for &seed in &cfg.seeds {
                for &snr_db in &snrs {
                    keys.push(InstanceKey { transform, kappa, seed, snr_db });
                }
            }
        }
    }
    keys
}

/// Runs every cell. Failures are recorded per cell; the result is sorted by
/// run id.
pub fn run_experiment(cfg: &ExperimentConfig, timing: bool) -> Vec<CellResult> {
    let mut results: Vec<CellResult> = instance_keys(cfg)
        .par_iter()
        .flat_map_iter(|ikey| {
            let cells: Vec<CellKey> = cfg
                .etas
                .iter()
                .flat_map(|&eta| cfg.methods.iter().map(move |&method| CellKey { instance: *ikey, eta, method }))
                .collect();
            match build(cfg, ikey) {
                Ok(inst) => cells
                    .par_iter()
                    .map(|key| {
                        let run_id = key.run_id(cfg.problem);
                        match run_cell(cfg, &inst, key, timing) {
                            Ok(h) => {
                                let error = match &h.status {
                                    RunStatus::Failed(e) => Some(e.to_string()),
                                    _ => None,
                                };
                                CellResult { run_id, key: *key, history: Some(h), error }
                            }
                            Err(e) => CellResult { run_id, key: *key, history: None, error: Some(e.to_string()) },
                        }
                    })
                    .collect::<Vec<_>>(),
                Err(e) => cells
                    .iter()
                    .map(|key| CellResult {
                        run_id: key.run_id(cfg.problem),
                        key: *key,
                        history: None,
                        error: Some(format!("data generation: {e}")),
                    })
                    .collect(),
            }
        })
        .collect();
    results.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    results
}
