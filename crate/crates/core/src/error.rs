use alloc::string::String;

/// Errors raised by the tensor algebra, metrics, and solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("transform matrix is not orthogonal up to scale (deviation {deviation:e}, limit {limit:e})")]
    NotOrthogonalUpToScale { deviation: f64, limit: f64 },
    #[error("inverse transform left an imaginary residue of {residue:e} (limit {limit:e})")]
    ImaginaryResidueTooLarge { residue: f64, limit: f64 },
    #[error("SVD of transformed slice {slice} did not converge")]
    SvdFailure { slice: usize },
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("transformed slice {0} is singular")]
    SingularSlice(usize),
    #[error("transformed slice {0} is not Hermitian positive semidefinite")]
    NotPsdSlice(usize),
    #[error("unknown norm kind `{0}`")]
    UnknownKind(String),
    #[error("empty spectrum: multi-rank sums to zero")]
    EmptySpectrum,
    #[error("factor slice {slice} is rank deficient")]
    RankDeficientFactor { slice: usize },
    #[error("alignment solver did not converge (criterion residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("reference tensor has zero norm")]
    ZeroReference,
    #[error("negative threshold {0}")]
    NegativeThreshold(f64),
    #[error("preconditioner singular in transformed slice {slice} at iteration {iteration}")]
    PreconditionerSingular { slice: usize, iteration: usize },
    #[error("signal has zero norm")]
    ZeroSignal,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("malformed TSR3 data: {0}")]
    Format(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn mismatch(op: &'static str, detail: String) -> Error {
    Error::DimensionMismatch { op, detail }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
