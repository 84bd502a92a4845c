use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsvd_bench::config::{self, ExperimentConfig, Overrides, Problem};
use tsvd_bench::experiment::{instance_keys, instance_tensors, run_experiment};
use tsvd_bench::plot::{emit_plot, PlotKind};
use tsvd_bench::tensor_io::write_tensor;
use tsvd_bench::trace::write_results;
use tsvd_bench::validate::{read_phi, validate_suite};
use tsvd_bench::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_ALL_DIVERGED: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(name = "tsvd-bench", version, about = "Synthetic t-SVD recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic tensors of every instance as TSR3 files.
    Gen(Common),
    /// Robust PCA experiment.
    Rpca(Common),
    /// Tensor completion experiment.
    Complete(Common),
    /// Factorization experiment from a perturbed ground truth.
    Factorize(Common),
    /// Step-size sweep of the configured problem.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Step sizes, comma separated (default: the config list, or 0.1 to 1.2 in steps of 0.1 when
        /// the config has a single value).
        #[arg(long, value_delimiter = ',')]
        etas: Vec<f64>,
    },
    /// Render traces (or a summary, for err_vs_eta) to SVG.
    Plot {
        /// err_vs_iter, err_vs_time, or err_vs_eta.
        #[arg(long, default_value = "err_vs_iter")]
        kind: PlotKind,
        /// Trace or summary CSV files, or experiment output directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        title: String,
    },
    /// Run the self-check suite.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Custom transform matrix to check, as a real square CSV.
        #[arg(long)]
        phi: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// dft or dct.
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    iters: Option<u32>,
    /// Record zero wall times so traces are byte-identical across runs.
    #[arg(long)]
    no_timing: bool,
}

impl Common {
    fn resolve(&self, problem: Option<Problem>) -> Result<ExperimentConfig, Error> {
        let o = Overrides {
            problem,
            out: self.out.clone(),
            seed: self.seed,
            transform: self.transform.clone(),
            eta: self.eta,
            iters: self.iters.map(|n| n as usize),
        };
        config::resolve(self.config.as_deref(), &o)
    }
}

fn run(cfg: &ExperimentConfig, timing: bool, plot: PlotKind) -> Result<ExitCode, Error> {
    let cells = run_experiment(cfg, timing);
    let traces = write_results(&cfg.out, &cells)?;
    for c in &cells {
        let last = c.history.as_ref().map(|h| h.final_rel_err()).unwrap_or(f64::NAN);
        let err = c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
        println!("{:<48} {:<9} rel_err {last:.3e}{err}", c.run_id, c.status());
    }
    let inputs: Vec<PathBuf> =
        if plot.reads_traces() { traces } else { vec![cfg.out.join("summary.csv")] };
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let svg_path = cfg.out.join(format!("{}.svg", plot.name()));
    match emit_plot(&refs, plot, cfg.problem.name()) {
        Ok(svg) => std::fs::write(&svg_path, svg).map_err(|e| Error::Io { path: svg_path, source: e })?,
        Err(Error::EmptyTraceSet(why)) => eprintln!("no plot written: {why}"),
        Err(e) => return Err(e),
    }
    if !cells.is_empty() && cells.iter().all(|c| c.is_bad()) {
        eprintln!("every cell diverged or failed");
        return Ok(ExitCode::from(EXIT_ALL_DIVERGED));
    }
    Ok(ExitCode::SUCCESS)
}

fn gen(cfg: &ExperimentConfig) -> Result<ExitCode, Error> {
    let dir = cfg.out.join("tensors");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    for key in instance_keys(cfg) {
        let base = key.name(cfg.problem);
        for (name, t) in instance_tensors(cfg, &key)? {
            let path = dir.join(format!("{base}-{name}.tsr3"));
            write_tensor(&path, &t)?;
            println!("{}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Directories stand for their traces, or for their summary when plotting
/// against the step size.
fn expand_inputs(inputs: &[PathBuf], kind: PlotKind) -> Result<Vec<PathBuf>, Error> {
    let mut out = Vec::new();
    for p in inputs {
        if !p.is_dir() {
            out.push(p.clone());
        } else if !kind.reads_traces() {
            out.push(p.join("summary.csv"));
        } else {
            let dir = p.join("traces");
            let mut found: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| Error::Io { path: dir.clone(), source: e })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            out.extend(found);
        }
    }
    Ok(out)
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Gen(c) => gen(&c.resolve(None)?),
        Command::Rpca(c) => run(&c.resolve(Some(Problem::Rpca))?, !c.no_timing, PlotKind::ErrVsIter),
        Command::Complete(c) => run(&c.resolve(Some(Problem::Completion))?, !c.no_timing, PlotKind::ErrVsIter),
        Command::Factorize(c) => run(&c.resolve(Some(Problem::Factorization))?, !c.no_timing, PlotKind::ErrVsIter),
        Command::Sweep { common, etas } => {
            let mut cfg = common.resolve(None)?;
            if !etas.is_empty() {
                if let Some((i, bad)) = etas.iter().enumerate().find(|(_, e)| !(**e >= 0.0 && e.is_finite())) {
                    return Err(Error::Config {
                        path: format!("--etas[{i}]"),
                        reason: format!("must be finite and >= 0, got {bad}"),
                    });
                }
                cfg.etas = etas;
            } else if cfg.etas.len() == 1 {
                cfg.etas = (1..=12).map(|i| i as f64 / 10.0).collect();
            }
            run(&cfg, !common.no_timing, PlotKind::ErrVsEta)
        }
        Command::Plot { kind, inputs, out, title } => {
            let files = expand_inputs(&inputs, kind)?;
            let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
            let svg = emit_plot(&refs, kind, &title)?;
            std::fs::write(&out, svg).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { seed, phi } => {
            let phi = phi.as_deref().map(read_phi).transpose()?;
            let report = validate_suite(seed, phi);
            print!("{}", report.render());
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VALIDATION) })
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
