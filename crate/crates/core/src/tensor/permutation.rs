use serde::{Deserialize, Serialize};

use super::TensorError;

/// A bijective reordering of tensor axes.
///
/// `order[i]` names the source axis that becomes axis `i` of the output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self, TensorError> {
        let mut seen = vec![false; order.len()];
        for &axis in &order {
            if axis >= order.len() || seen[axis] {
                return Err(TensorError::InvalidPermutation(order));
            }
            seen[axis] = true;
        }
        Ok(Self { order })
    }

    pub fn identity(rank: usize) -> Self {
        Self {
            order: (0..rank).collect(),
        }
    }

    /// The permutation that moves `mode` to the front and keeps the remaining
    /// axes in their original relative order, e.g. `(2, 0, 1, 3)` for mode 2
    /// of a rank-4 tensor.
    pub fn mode_first(rank: usize, mode: usize) -> Result<Self, TensorError> {
        if mode >= rank {
            return Err(TensorError::AxisOutOfRange { axis: mode, rank });
        }
        let order = std::iter::once(mode)
            .chain((0..rank).filter(|&a| a != mode))
            .collect();
        Ok(Self { order })
    }

    /// One mode-first permutation per axis, in axis order. For rank 4 this is
    /// `p_h, p_w, p_d, p_c`.
    pub fn default_mode_order(rank: usize) -> Vec<Self> {
        (0..rank)
            .map(|m| Self::mode_first(rank, m).expect("mode < rank"))
            .collect()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn rank(&self) -> usize {
        self.order.len()
    }

    /// The axis this permutation places first.
    pub fn leading_axis(&self) -> usize {
        self.order[0]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.order.len()];
        for (i, &axis) in self.order.iter().enumerate() {
            inv[axis] = i;
        }
        Self { order: inv }
    }

    /// `self.compose(other)` applies `self` first, then `other`, so that
    /// `permute(permute(x, self), other) == permute(x, self.compose(other))`.
    pub fn compose(&self, other: &Self) -> Result<Self, TensorError> {
        if self.rank() != other.rank() {
            return Err(TensorError::RankMismatch {
                expected: self.rank(),
                actual: other.rank(),
            });
        }
        Ok(Self {
            order: other.order.iter().map(|&i| self.order[i]).collect(),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &a)| i == a)
    }
}
