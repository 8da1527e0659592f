//! Minimal reverse-mode differentiation over dense `f64` matrices.
//!
//! Forward primitives are methods on [`Tape`]; each call computes its value
//! eagerly and records enough to run the reverse sweep in
//! [`Tape::backward`]. [`gradient_check`] compares the result against
//! central finite differences.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{gradient_check, relative_error, CoordinateFailure, GradCheckReport, ParamCheck};
pub use tape::{Gradients, Tape, Var, NORM_EPS};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op} expects a vector, got shape {shape:?}")]
    NotVector { op: &'static str, shape: (usize, usize) },
    #[error("buffer of length {len} cannot fill a {rows}x{cols} tensor")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("row index {index} out of range for {rows} rows")]
    RowIndex { index: usize, rows: usize },
    #[error("softmax over a fully masked vector")]
    AllMasked,
    #[error("{0} produced a non-finite value")]
    NonFinite(&'static str),
    #[error("{0} on empty input")]
    Empty(&'static str),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
}
