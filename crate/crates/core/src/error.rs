//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by tensor algebra, reduction algorithms, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {details}")]
    DimensionMismatch { op: &'static str, details: String },

    #[error("fourier block {block} is numerically singular (rcond ~ {rcond:.3e})")]
    SingularBlock { block: usize, rcond: f64 },

    #[error(
        "inverse transform produced a non-real tensor (residual imaginary part {residual:.3e} exceeds {tol:.3e})"
    )]
    NonRealResult { residual: f64, tol: f64 },

    #[error("eigenvalue/SVD iteration failed to converge on fourier block {block}")]
    ConvergenceFailure { block: usize },

    #[error("singular value {value:.3e} at tuple index {index} is below the inversion floor")]
    NearZeroSingularValue { index: usize, value: f64 },

    #[error("system is not stable (spectral radius {radius})")]
    UnstableSystem { radius: f64 },

    #[error("stein solver stagnated on block {block} (relative residual {residual:.3e})")]
    SolverStagnation { block: usize, residual: f64 },

    #[error("frequency point too close to a pole in fourier block {block} (rcond ~ {rcond:.3e})")]
    PoleProximity { block: usize, rcond: f64 },

    #[error("gramian block {block} has eigenvalue {eigenvalue:.3e} below the PSD repair window")]
    IndefiniteGramian { block: usize, eigenvalue: f64 },

    #[error("{required} impulse-response snapshots required, only {available} supplied")]
    InsufficientSnapshots { required: usize, available: usize },

    #[error("truncation level k={k} not below the available rank {available}")]
    TruncationTooLarge { k: usize, available: usize },

    #[error("bad magic bytes in tensor file (expected \"T3B1\")")]
    BadMagic,

    #[error("truncated tensor payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: u64, actual: u64 },

    #[error("tensor dimensions {n}x{m}x{s} overflow the addressable payload size")]
    DimOverflow { n: u64, m: u64, s: u64 },

    #[error("frame {index} has dimensions {found}, expected {expected}")]
    InconsistentDimensions {
        index: usize,
        expected: String,
        found: String,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    /// The CLI maps these to exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularBlock { .. }
                | Error::NonRealResult { .. }
                | Error::ConvergenceFailure { .. }
                | Error::NearZeroSingularValue { .. }
                | Error::UnstableSystem { .. }
                | Error::SolverStagnation { .. }
                | Error::PoleProximity { .. }
                | Error::IndefiniteGramian { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
