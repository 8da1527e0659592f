//! AspeRa: rating prediction from review text with two attention-based
//! aspect encoders, one for users and one for items.
//!
//! The pipeline runs [`corpus`] ingestion and splitting, word vectors from
//! [`embeddings`], aspect encoders from [`abae`], joint training in
//! [`model`] and scoring in [`eval`]. Gradients come from the small
//! reverse-mode engine in [`diffcore`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod abae;
pub mod checkpoint;
pub mod corpus;
pub mod diagnostics;
pub mod diffcore;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod model;
pub mod optim;
pub mod synthetic;

pub use error::{Error, Result};
