//! Weyl–Titchmarsh functions of time-reversed discrete symplectic systems
//! `z_k = (S_k + λV_k) z_{k+1}` on the half-line, and a spectral classifier
//! driven by their boundary behaviour on the real axis.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod error;
pub mod extrapolate;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod propagate;
pub mod quadrature;
pub mod resolvent;
pub mod serde_complex;
pub mod system;
pub mod weyl;

pub use error::{Error, Result};
pub use linalg::CMat;
pub use num_complex::Complex64;
pub use system::{BoundaryMatrix, SymplecticSystem};
pub use weyl::{limit_m, LimitOptions, MFunction, MPlusEvaluation, SystemMFunction};
