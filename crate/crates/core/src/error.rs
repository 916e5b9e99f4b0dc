use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("coefficient provider failed at k = {k}: {reason}")]
    Provider { k: usize, reason: String },

    #[error("structure violation: {0}")]
    Structure(String),

    #[error("propagation overflow at index {index}")]
    Overflow { index: usize },

    #[error("boundary matrix beta * Ztilde_{n} is singular at lambda = {lambda}")]
    SingularBoundary { lambda: Complex64, n: usize },

    #[error("every beta-probe stays singular near N = {n} at lambda = {lambda}")]
    DegenerateSystem { lambda: Complex64, n: usize },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("bad input: {0}")]
    BadInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("pole candidate at {lambda} is not isolated: {reason}")]
    NotIsolated { lambda: f64, reason: String },

    #[error("residue inconsistent with eigenfunction norm: {0}")]
    InconsistentResidue(String),

    #[error("lambda = {0} is a breakpoint of the spectral function")]
    Pole(f64),

    #[error("transformed M-function has a pole at lambda = {0}")]
    PoleOfTransform(Complex64),

    #[error("invalid model at k = {k}: {reason}")]
    BadModel { k: usize, reason: String },

    #[error("unknown model: {0}")]
    UnknownModel(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),
}
