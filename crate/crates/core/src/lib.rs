//! Low-rank tensor algebra under invertible mode-3 transforms, with scaled
//! gradient descent solvers for factorization, robust PCA, and completion.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
mod linalg;
pub mod metrics;
pub mod solvers;
pub mod synth;
pub mod talg;
pub mod tensor;
pub mod transform;
pub mod tsr3;

pub use error::{Error, Result};
pub use metrics::{align, dist, incoherence, relative_error, AlignmentResult, FactorPair, GroundTruth};
pub use solvers::{
    Clock, IterRecord, Method, NoClock, ObservationSet, RunHistory, RunStatus, SolverOutput,
    SolverParams, ThresholdSchedule,
};
pub use talg::{
    conj_transpose, identity_tensor, multi_rank, norm, t_inverse, t_product, t_sqrt, t_svd,
    truncate, MultiRank, NormKind, TSVDFactors,
};
pub use tensor::Tensor3;
pub use transform::{
    make_custom_transform, make_transform, SliceSymmetry, SpectralTensor, TransformKind,
    TransformSpec,
};
