//! Reverse-mode differentiation over the primitives folded attention uses,
//! with a central-difference checker.
//!
//! Supported primitives are exactly the [`Tape`] recording methods: permute,
//! unfold, fold, transpose, matmul, row softmax, channel linear, elementwise
//! add and multiply, and full sum.

mod backward;
mod gradcheck;
mod graph;
mod tape;

use thiserror::Error;

use crate::attention::AttentionError;
use crate::tensor::TensorError;

pub use backward::{backward, GradResult};
pub use gradcheck::{
    finite_diff_check, relative_error, FdReport, Offender, DEFAULT_RTOL, DEFAULT_STEP,
};
pub use graph::{
    record_and_run, FoldedAttentionGraph, Graph, NamedInput, Recording, SumAll, SumOfSquares,
};
pub use tape::{Node, NodeId, Op, Tape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error("unsupported in a taped graph: {0}")]
    Unsupported(String),
    #[error("node {0} is not on the tape")]
    UnknownNode(usize),
    #[error("seed shape {actual:?} does not match output shape {expected:?}")]
    SeedShape {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("non-finite gradient reaching node {node}")]
    NonFinite { node: usize },
    #[error("graph expects {expected} inputs, got {actual}")]
    InputCount { expected: usize, actual: usize },
    #[error("loss must be scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("no gradient recorded for input {0}")]
    MissingGradient(String),
}
