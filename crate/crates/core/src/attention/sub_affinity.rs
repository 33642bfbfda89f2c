use nalgebra::DMatrix;

use super::{AttentionError, FAParams};
use crate::tensor::{
    matmul_counted, row_softmax_counted, unfold, FeatureTensor, Matrix2D, OpCounter, Permutation,
};

const STOCHASTIC_TOL: f64 = 1e-12;

/// A square row-stochastic matrix mixing the entries of one tensor axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubAffinityMatrix {
    mode: usize,
    m: Matrix2D,
}

impl SubAffinityMatrix {
    /// Wraps `m` as the affinity of `mode`. Rows must be nonnegative and sum
    /// to one.
    pub fn new(mode: usize, m: Matrix2D) -> Result<Self, AttentionError> {
        if m.rows() != m.cols() {
            return Err(AttentionError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        for i in 0..m.rows() {
            let row = m.row(i);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > STOCHASTIC_TOL
            {
                return Err(AttentionError::NotStochastic { row: i, sum });
            }
        }
        Ok(Self { mode, m })
    }

    pub fn identity(mode: usize, side: usize) -> Self {
        Self {
            mode,
            m: Matrix2D::identity(side).expect("side > 0"),
        }
    }

    pub fn uniform(mode: usize, side: usize) -> Self {
        Self {
            mode,
            m: Matrix2D::uniform(side).expect("side > 0"),
        }
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn side(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &Matrix2D {
        &self.m
    }

    /// Row `i`: the weights element `i` of this axis assigns to every other.
    pub fn row(&self, i: usize) -> &[f64] {
        self.m.row(i)
    }
}

/// `A^p = SM(u(theta(x), p) u(phi(x), p)^T)`, from the original input.
pub fn compute_sub_affinity(
    x: &FeatureTensor,
    params: &FAParams,
    p: &Permutation,
) -> Result<SubAffinityMatrix, AttentionError> {
    if p.rank() != x.rank() {
        return Err(crate::tensor::TensorError::RankMismatch {
            expected: x.rank(),
            actual: p.rank(),
        }
        .into());
    }
    params.validate_maps(x.channels())?;
    let (theta, phi) = params.embedding_for(p.leading_axis());
    let mut counter = OpCounter::default();
    let tx = theta.apply_counted(x, &mut counter)?;
    let px = phi.apply_counted(x, &mut counter)?;
    sub_affinity_from_embeddings(&tx, &px, p, &mut counter)
}

/// Sub-affinity from already-embedded `theta(x)` and `phi(x)`.
pub(crate) fn sub_affinity_from_embeddings(
    tx: &FeatureTensor,
    px: &FeatureTensor,
    p: &Permutation,
    counter: &mut OpCounter,
) -> Result<SubAffinityMatrix, AttentionError> {
    let ut = unfold(tx, p)?;
    let up = unfold(px, p)?;
    let logits = matmul_counted(&ut, &up.transpose(), counter)?;
    let m = row_softmax_counted(&logits, counter)?;
    Ok(SubAffinityMatrix {
        mode: p.leading_axis(),
        m,
    })
}

/// The weights anchor element `v` assigns to every element: the outer product
/// of row `v[mode]` of each mode's sub-affinity.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityTensor {
    pub v: Vec<usize>,
    pub a: FeatureTensor,
}

impl AffinityTensor {
    pub fn sum(&self) -> f64 {
        self.a.sum()
    }

    /// `sigma_2 / sigma_1` of each mode unfolding, in axis order. A mode of
    /// length 1 (or an unfolding with a single column) reports 0.
    pub fn mode_singular_ratios(&self) -> Result<Vec<f64>, AttentionError> {
        let rank = self.a.rank();
        (0..rank)
            .map(|mode| {
                let p = Permutation::mode_first(rank, mode)?;
                let m = unfold(&self.a, &p)?;
                let dm = DMatrix::from_row_slice(m.rows(), m.cols(), m.data());
                let mut sv: Vec<f64> = dm.singular_values().iter().copied().collect();
                sv.sort_by(|a, b| b.total_cmp(a));
                Ok(match (sv.first(), sv.get(1)) {
                    (Some(&s1), Some(&s2)) if s1 > 0.0 => s2 / s1,
                    _ => 0.0,
                })
            })
            .collect()
    }
}

/// `A_v[w] = prod_mode subs[mode][v[mode], w[mode]]`.
pub fn rank_one_affinity(
    subs: &[SubAffinityMatrix],
    v: &[usize],
) -> Result<AffinityTensor, AttentionError> {
    let rows = rows_by_mode(subs, v)?;
    let shape: Vec<usize> = rows.iter().map(|r| r.len()).collect();
    let a = FeatureTensor::from_fn(shape, |w| {
        w.iter()
            .zip(&rows)
            .fold(1.0, |acc, (&wi, row)| acc * row[wi])
    })?;
    Ok(AffinityTensor { v: v.to_vec(), a })
}

/// For each axis in order, the row of that axis' sub-affinity selected by `v`.
pub(crate) fn rows_by_mode<'a>(
    subs: &'a [SubAffinityMatrix],
    v: &[usize],
) -> Result<Vec<&'a [f64]>, AttentionError> {
    let rank = v.len();
    let mut rows: Vec<Option<&[f64]>> = vec![None; rank];
    for s in subs {
        if s.mode >= rank {
            return Err(AttentionError::ModeOrder(format!(
                "sub-affinity for axis {} but anchor has rank {rank}",
                s.mode
            )));
        }
        if rows[s.mode].is_some() {
            return Err(AttentionError::ModeOrder(format!(
                "two sub-affinities for axis {}",
                s.mode
            )));
        }
        let i = v[s.mode];
        if i >= s.side() {
            return Err(crate::tensor::TensorError::IndexOutOfBounds {
                axis: s.mode,
                index: i,
                len: s.side(),
            }
            .into());
        }
        rows[s.mode] = Some(s.row(i));
    }
    rows.into_iter()
        .enumerate()
        .map(|(axis, r)| r.ok_or(AttentionError::MissingMode(axis)))
        .collect()
}
