//! Self-attention baseline and folded attention.
//!
//! Folded attention replaces the `NC x NC` element affinity with one small
//! row-stochastic matrix per axis. Each sub-affinity is
//! `SM(u(theta(X), p) u(phi(X), p)^T)` for the mode-first permutation `p` of
//! its axis, and the output mixes `g(X)` along every axis in turn. The
//! element-level affinity of position `v` is then the outer product of one
//! row per sub-affinity, a rank-one tensor; [`oracle_aggregate`] evaluates
//! that enumeration directly and serves as ground truth for the cascade.

mod cascade;
mod oracle;
mod params;
pub mod reference;
mod self_attention;
mod sub_affinity;

use thiserror::Error;

use crate::tensor::TensorError;

pub use cascade::{
    aggregate_cascade, aggregate_mode, compute_all_sub_affinities, folded_attention,
    folded_attention_instrumented, two_mode_illustration, FaOpCounts,
};
pub use oracle::{oracle_aggregate, oracle_aggregate_with, ORACLE_MAX_ELEMENTS};
pub use params::{Embedding, FAOptions, FAParams, LinearMapParams};
pub use self_attention::{
    sa_affinity_bytes, self_attention, self_attention_with_budget, DEFAULT_SA_BUDGET_BYTES,
};
pub use sub_affinity::{
    compute_sub_affinity, rank_one_affinity, AffinityTensor, SubAffinityMatrix,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("invalid mode order: {0}")]
    ModeOrder(String),
    #[error("no sub-affinity for axis {0}")]
    MissingMode(usize),
    #[error("sub-affinity must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("sub-affinity row {row} is not a probability vector (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },
    #[error(
        "axis {mode} has length {len} but the sub-affinity is for axis {affinity_mode} with side {side}"
    )]
    AffinityMismatch {
        mode: usize,
        len: usize,
        affinity_mode: usize,
        side: usize,
    },
    #[error("self-attention affinity needs {required} bytes, budget is {budget}")]
    MemoryBudget { required: u128, budget: u64 },
    #[error("oracle refuses {elements} elements (limit {limit})")]
    OracleTooLarge { elements: usize, limit: usize },
}
