use serde::{Deserialize, Serialize};

use super::sub_affinity::sub_affinity_from_embeddings;
use super::{AttentionError, FAParams, SubAffinityMatrix};
use crate::tensor::{fold, matmul_counted, unfold, FeatureTensor, OpCounter, Permutation};

/// Operation counts of one folded attention forward, itemized by stage.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaOpCounts {
    /// MACs spent in `theta`, `phi` and `g`.
    pub embed_macs: u64,
    /// MACs spent forming sub-affinity logits.
    pub affinity_macs: u64,
    /// Entries passed through the row softmax.
    pub softmax_entries: u64,
    /// MACs spent in the mode-mixing cascade.
    pub aggregate_macs: u64,
}

/// `f(A^p u(y, p), p)`: mixes `y` along the axis `p` leads with.
pub fn aggregate_mode(
    y: &FeatureTensor,
    a: &SubAffinityMatrix,
    p: &Permutation,
) -> Result<FeatureTensor, AttentionError> {
    aggregate_mode_counted(y, a, p, &mut OpCounter::default())
}

pub(crate) fn aggregate_mode_counted(
    y: &FeatureTensor,
    a: &SubAffinityMatrix,
    p: &Permutation,
    counter: &mut OpCounter,
) -> Result<FeatureTensor, AttentionError> {
    if p.rank() != y.rank() {
        return Err(crate::tensor::TensorError::RankMismatch {
            expected: y.rank(),
            actual: p.rank(),
        }
        .into());
    }
    let lead = p.leading_axis();
    if a.mode() != lead || a.side() != y.shape()[lead] {
        return Err(AttentionError::AffinityMismatch {
            mode: lead,
            len: y.shape()[lead],
            affinity_mode: a.mode(),
            side: a.side(),
        });
    }
    let mixed = matmul_counted(a.matrix(), &unfold(y, p)?, counter)?;
    Ok(fold(&mixed, p, y.shape())?)
}

/// Applies the cascade of mode mixings to an already-embedded `g(x)`, one
/// stage per permutation, using the sub-affinity of each permutation's
/// leading axis.
pub fn aggregate_cascade(
    gx: &FeatureTensor,
    subs: &[SubAffinityMatrix],
    order: &[Permutation],
) -> Result<FeatureTensor, AttentionError> {
    let mut y = gx.clone();
    for p in order {
        let a = subs
            .iter()
            .find(|s| s.mode() == p.leading_axis())
            .ok_or(AttentionError::MissingMode(p.leading_axis()))?;
        y = aggregate_mode(&y, a, p)?;
    }
    Ok(y)
}

/// All sub-affinities for `x`, one per entry of the resolved mode order.
pub fn compute_all_sub_affinities(
    x: &FeatureTensor,
    params: &FAParams,
) -> Result<Vec<SubAffinityMatrix>, AttentionError> {
    let order = params.validate_folded(x.shape())?;
    let mut counts = FaOpCounts::default();
    sub_affinities(x, params, &order, &mut counts)
}

fn sub_affinities(
    x: &FeatureTensor,
    params: &FAParams,
    order: &[Permutation],
    counts: &mut FaOpCounts,
) -> Result<Vec<SubAffinityMatrix>, AttentionError> {
    let mut embed = OpCounter::default();
    let mut affinity = OpCounter::default();
    let shared = if params.per_mode.is_none() {
        let tx = params.theta.apply_counted(x, &mut embed)?;
        let px = params.phi.apply_counted(x, &mut embed)?;
        Some((tx, px))
    } else {
        None
    };
    let mut subs = Vec::with_capacity(order.len());
    for p in order {
        let sub = match &shared {
            Some((tx, px)) => sub_affinity_from_embeddings(tx, px, p, &mut affinity)?,
            None => {
                let (theta, phi) = params.embedding_for(p.leading_axis());
                let tx = theta.apply_counted(x, &mut embed)?;
                let px = phi.apply_counted(x, &mut embed)?;
                sub_affinity_from_embeddings(&tx, &px, p, &mut affinity)?
            }
        };
        subs.push(sub);
    }
    counts.embed_macs += embed.macs;
    counts.affinity_macs += affinity.macs;
    counts.softmax_entries += affinity.softmax_entries;
    Ok(subs)
}

/// Folded attention: every sub-affinity is computed from `x` first, then
/// `g(x)` is mixed along each axis in turn.
pub fn folded_attention(
    x: &FeatureTensor,
    params: &FAParams,
) -> Result<FeatureTensor, AttentionError> {
    folded_attention_instrumented(x, params).map(|(z, _)| z)
}

/// [`folded_attention`] that also reports how much arithmetic each stage did.
pub fn folded_attention_instrumented(
    x: &FeatureTensor,
    params: &FAParams,
) -> Result<(FeatureTensor, FaOpCounts), AttentionError> {
    let order = params.validate_folded(x.shape())?;
    let mut counts = FaOpCounts::default();
    let subs = sub_affinities(x, params, &order, &mut counts)?;

    let mut embed = OpCounter::default();
    let mut mix = OpCounter::default();
    let mut y = if params.options.reapply_g {
        x.clone()
    } else {
        params.g.apply_counted(x, &mut embed)?
    };
    for (p, a) in order.iter().zip(&subs) {
        if params.options.reapply_g {
            y = params.g.apply_counted(&y, &mut embed)?;
        }
        y = aggregate_mode_counted(&y, a, p, &mut mix)?;
    }
    if params.options.residual {
        y = y.zip_with(x, |a, b| a + b)?;
    }
    counts.embed_macs += embed.macs;
    counts.aggregate_macs += mix.macs;
    Ok((y, counts))
}

/// The two-axis case: `x` is `(W, C)` and
/// `Z_ij = (a^w_i (x) a^c_j) . g(X)`, with the width mixing applied first.
pub fn two_mode_illustration(
    x: &FeatureTensor,
    params: &FAParams,
) -> Result<FeatureTensor, AttentionError> {
    if x.rank() != 2 {
        return Err(crate::tensor::TensorError::RankMismatch {
            expected: 2,
            actual: x.rank(),
        }
        .into());
    }
    folded_attention(x, params)
}
