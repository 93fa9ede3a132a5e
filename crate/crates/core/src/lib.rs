//! Learning-to-rank experimentation toolkit: label engineering that blends
//! content relevance with engagement, LambdaMART training, offline and
//! interleaved online evaluation, and TreeSHAP attribution, all runnable on
//! synthetic corpora with known ground truth.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod datamodel;
pub mod error;
pub mod eval;
pub mod explain;
pub mod interleave;
pub mod labelforge;
pub mod ranker;
pub mod seed;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
