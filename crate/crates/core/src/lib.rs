//! Folded attention as verifiable numerical kernels.
//!
//! - [`tensor`]: row-major tensors, permutation, mode unfold/fold, matmul,
//!   softmax, channel maps.
//! - [`attention`]: self-attention baseline, sub-affinities, the folded
//!   cascade and its rank-one enumeration oracle.
//! - [`autodiff`]: a small reverse-mode tape over the same primitives, with a
//!   central-difference gradient checker.
//! - [`cost`]: exact FLOP and affinity-storage counts for SA, naive
//!   spatial-channel SA, dual attention and folded attention.

pub mod attention;
pub mod autodiff;
pub mod cost;
pub mod init;
pub mod tensor;

pub use attention::{
    folded_attention, oracle_aggregate, self_attention, AttentionError, FAParams, LinearMapParams,
    SubAffinityMatrix,
};
pub use tensor::{FeatureTensor, Matrix2D, Permutation, TensorError};
