//! Experiment harness for `tsvd-core`: TOML manifests, parallel synthetic
//! runs, CSV traces, SVG plots, TSR3 tensor files, and a validation suite.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod tensor_io;
pub mod trace;
pub mod validate;

pub use config::{ExperimentConfig, Overrides, Problem, RawConfig};
pub use error::{Error, Result};
pub use experiment::{run_experiment, CellResult};
pub use plot::{emit_plot, PlotKind};
pub use validate::{validate_suite, Report};
