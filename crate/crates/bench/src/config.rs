//! Experiment manifests. Every field has a default taken from the standard
//! synthetic setup, so a manifest only lists what it changes.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tsvd_core::{Method, SolverParams, ThresholdSchedule, TransformKind};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Rpca,
    Completion,
    Factorization,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Rpca => "rpca",
            Problem::Completion => "completion",
            Problem::Factorization => "factorization",
        }
    }
}

impl std::str::FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rpca" => Ok(Problem::Rpca),
            "completion" | "complete" => Ok(Problem::Completion),
            "factorization" | "factorize" => Ok(Problem::Factorization),
            other => Err(format!("unknown problem `{other}` (expected rpca, completion, or factorization)")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub zeta0: f64,
    pub zeta1: f64,
    pub rho: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { zeta0: 0.5, zeta1: 0.5, rho: 0.95 }
    }
}

/// The manifest as written on disk.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub problem: String,
    pub methods: Vec<String>,
    pub dims: [usize; 3],
    pub rank: usize,
    pub transforms: Vec<String>,
    pub kappas: Vec<f64>,
    pub alpha: f64,
    pub p: f64,
    /// Noise levels in dB; empty means noiseless.
    pub snr_db: Vec<f64>,
    pub etas: Vec<f64>,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub schedule: ScheduleConfig,
    pub varsigma: Option<f64>,
    /// Relative size of the warm-start perturbation for factorization.
    pub init_perturbation: f64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            problem: "rpca".into(),
            methods: vec!["scaledgd".into(), "vanillagd".into()],
            dims: [100, 100, 100],
            rank: 10,
            transforms: vec!["dft".into()],
            kappas: vec![1.0, 5.0, 10.0, 20.0],
            alpha: 0.1,
            p: 0.4,
            snr_db: Vec::new(),
            etas: vec![0.5],
            max_iters: 100,
            rel_tol: 1e-14,
            schedule: ScheduleConfig::default(),
            varsigma: None,
            init_perturbation: 0.01,
            seeds: vec![1],
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the manifest.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub problem: Option<Problem>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub transform: Option<String>,
    pub eta: Option<f64>,
    pub iters: Option<usize>,
}

/// A validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub methods: Vec<Method>,
    pub dims: (usize, usize, usize),
    pub rank: usize,
    pub transforms: Vec<TransformKind>,
    pub kappas: Vec<f64>,
    pub alpha: f64,
    pub p: f64,
    pub snr_db: Vec<f64>,
    pub etas: Vec<f64>,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub schedule: ThresholdSchedule,
    pub varsigma: Option<f64>,
    pub init_perturbation: f64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl RawConfig {
    pub fn from_toml(text: &str, file: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| Error::ConfigSyntax { file: file.to_path_buf(), source })
    }

    pub fn load(file: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        Self::from_toml(&text, file)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = o.problem {
            self.problem = p.name().into();
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(seed) = o.seed {
            self.seeds = vec![seed];
        }
        if let Some(t) = &o.transform {
            self.transforms = vec![t.clone()];
        }
        if let Some(eta) = o.eta {
            self.etas = vec![eta];
        }
        if let Some(iters) = o.iters {
            self.max_iters = iters;
        }
    }

    /// Checks every field before anything runs.
    pub fn validate(&self) -> Result<ExperimentConfig> {
        let problem: Problem = self.problem.parse().map_err(|e| Error::config("problem", e))?;
        let methods = non_empty("methods", &self.methods)?
            .iter()
            .enumerate()
            .map(|(i, m)| m.parse::<Method>().map_err(|e| Error::config(format!("methods[{i}]"), e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let transforms = non_empty("transforms", &self.transforms)?
            .iter()
            .enumerate()
            .map(|(i, t)| match t.parse::<TransformKind>() {
                Ok(TransformKind::Custom) | Err(_) => {
                    Err(Error::config(format!("transforms[{i}]"), format!("expected dft or dct, got `{t}`")))
                }
                Ok(k) => Ok(k),
            })
            .collect::<Result<Vec<_>>>()?;
        let [n1, n2, n3] = self.dims;
        for (i, &n) in self.dims.iter().enumerate() {
            if n == 0 {
                return Err(Error::config(format!("dims[{i}]"), "must be positive"));
            }
        }
        if self.rank == 0 || self.rank > n1.min(n2) {
            return Err(Error::config("rank", format!("must lie in 1..={}, got {}", n1.min(n2), self.rank)));
        }
        for (i, &k) in non_empty("kappas", &self.kappas)?.iter().enumerate() {
            if !(k >= 1.0 && k.is_finite()) {
                return Err(Error::config(format!("kappas[{i}]"), format!("must be finite and >= 1, got {k}")));
            }
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", format!("must lie in [0, 1), got {}", self.alpha)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config("p", format!("must lie in (0, 1], got {}", self.p)));
        }
        for (i, &s) in self.snr_db.iter().enumerate() {
            if !(s.is_finite() || s == f64::INFINITY) {
                return Err(Error::config(format!("snr_db[{i}]"), format!("must be finite or inf, got {s}")));
            }
        }
        let schedule = ThresholdSchedule {
            zeta0: self.schedule.zeta0,
            zeta1: self.schedule.zeta1,
            rho: self.schedule.rho,
        };
        schedule.validate().map_err(|e| Error::config(schedule_field(&e), e.to_string()))?;
        for (i, &eta) in non_empty("etas", &self.etas)?.iter().enumerate() {
            let mut params = SolverParams::new(self.rank);
            params.eta = eta;
            params.validate().map_err(|e| Error::config(format!("etas[{i}]"), e.to_string()))?;
        }
        let mut params = SolverParams::new(self.rank);
        params.max_iters = self.max_iters;
        params.rel_tol = self.rel_tol;
        params.projection_radius = self.varsigma;
        params.validate().map_err(|e| match e {
            tsvd_core::Error::InvalidParameter { name, reason } => {
                Error::config(if name == "projection_radius" { "varsigma" } else { name }, reason)
            }
            other => Error::config("params", other.to_string()),
        })?;
        if !(self.init_perturbation >= 0.0 && self.init_perturbation.is_finite()) {
            return Err(Error::config(
                "init_perturbation",
                format!("must be finite and >= 0, got {}", self.init_perturbation),
            ));
        }
        non_empty("seeds", &self.seeds)?;
        Ok(ExperimentConfig {
            problem,
            methods,
            dims: (n1, n2, n3),
            rank: self.rank,
            transforms,
            kappas: self.kappas.clone(),
            alpha: self.alpha,
            p: self.p,
            snr_db: self.snr_db.clone(),
            etas: self.etas.clone(),
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            schedule,
            varsigma: self.varsigma,
            init_perturbation: self.init_perturbation,
            seeds: self.seeds.clone(),
            out: self.out.clone(),
        })
    }
}

fn non_empty<'a, T>(path: &str, v: &'a [T]) -> Result<&'a [T]> {
    if v.is_empty() {
        Err(Error::config(path, "must not be empty"))
    } else {
        Ok(v)
    }
}

fn schedule_field(e: &tsvd_core::Error) -> String {
    match e {
        tsvd_core::Error::InvalidParameter { name, .. } => format!("schedule.{name}"),
        _ => "schedule".into(),
    }
}

/// Loads a manifest (or the defaults when `file` is `None`), applies the
/// overrides, and validates.
pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut raw = match file {
        Some(f) => RawConfig::load(f)?,
        None => RawConfig::default(),
    };
    raw.apply(overrides);
    raw.validate()
}
