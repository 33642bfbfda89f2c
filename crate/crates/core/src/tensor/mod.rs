//! Dense row-major tensors and the layout primitives the attention kernels
//! are built from: axis permutation, mode unfolding/folding, matrix product,
//! row softmax, and per-position channel maps.

mod feature;
mod matrix;
mod ops;
mod permutation;

use thiserror::Error;

pub use feature::{FeatureTensor, IndexIter};
pub use matrix::Matrix2D;
pub use ops::{
    channel_linear, channel_linear_counted, fold, matmul, matmul_counted, permute_axes,
    row_softmax, row_softmax_counted, strides_of, unfold, OpCounter,
};
pub use permutation::Permutation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("tensor rank must be at least 2, got {0}")]
    RankTooSmall(usize),
    #[error("shape {0:?} has a zero-length axis")]
    ZeroAxis(Vec<usize>),
    #[error("buffer length {actual} does not match shape product {expected}")]
    DataLength { expected: usize, actual: usize },
    #[error("rank mismatch: expected {expected}, got {actual}")]
    RankMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("{0:?} is not a permutation")]
    InvalidPermutation(Vec<usize>),
    #[error("axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },
    #[error("index {index} out of bounds for axis {axis} of length {len}")]
    IndexOutOfBounds {
        axis: usize,
        index: usize,
        len: usize,
    },
    #[error("matrix has {rows} rows but the leading permuted axis has length {expected}")]
    FoldRows { rows: usize, expected: usize },
    #[error("inner dimensions differ: {left} vs {right}")]
    InnerDimension { left: usize, right: usize },
    #[error("weight expects {actual} input channels but tensor has {expected}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("bias length {actual} does not match output channels {expected}")]
    BiasLength { expected: usize, actual: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("rows have differing lengths")]
    RaggedRows,
}
