use rayon::prelude::*;

use super::sub_affinity::rows_by_mode;
use super::{compute_all_sub_affinities, AttentionError, FAParams, SubAffinityMatrix};
use crate::tensor::FeatureTensor;

/// Largest element count the enumeration oracle accepts.
pub const ORACLE_MAX_ELEMENTS: usize = 10_000;

/// Reference folded attention by enumeration: for every position `v`,
/// `Z[v] = sum_w A_v[w] * g(x)[w]` with `A_v` the rank-one affinity tensor.
///
/// Quadratic in the element count; only the g-once reading is supported.
pub fn oracle_aggregate(
    x: &FeatureTensor,
    params: &FAParams,
) -> Result<FeatureTensor, AttentionError> {
    guard(x.len())?;
    if params.options.reapply_g {
        return Err(AttentionError::Params(
            "the enumeration oracle only covers g applied once".into(),
        ));
    }
    let subs = compute_all_sub_affinities(x, params)?;
    let gx = params.g.apply(x)?;
    let z = oracle_aggregate_with(&subs, &gx)?;
    if params.options.residual {
        return Ok(z.zip_with(x, |a, b| a + b)?);
    }
    Ok(z)
}

/// Enumeration with caller-supplied sub-affinities. Each output element is
/// computed in isolation with row-major accumulation, so the result does not
/// depend on how positions are scheduled across threads.
pub fn oracle_aggregate_with(
    subs: &[SubAffinityMatrix],
    gx: &FeatureTensor,
) -> Result<FeatureTensor, AttentionError> {
    guard(gx.len())?;
    for s in subs {
        if s.mode() < gx.rank() && s.side() != gx.shape()[s.mode()] {
            return Err(AttentionError::AffinityMismatch {
                mode: s.mode(),
                len: gx.shape()[s.mode()],
                affinity_mode: s.mode(),
                side: s.side(),
            });
        }
    }
    rows_by_mode(subs, &vec![0; gx.rank()])?;

    let positions: Vec<Vec<usize>> = gx.indices().collect();
    let values = positions
        .par_iter()
        .map(|v| {
            let av = super::rank_one_affinity(subs, v)?;
            Ok(av
                .a
                .data()
                .iter()
                .zip(gx.data())
                .fold(0.0, |acc, (w, g)| acc + w * g))
        })
        .collect::<Result<Vec<f64>, AttentionError>>()?;
    Ok(FeatureTensor::new(gx.shape().to_vec(), values)?)
}

fn guard(elements: usize) -> Result<(), AttentionError> {
    if elements > ORACLE_MAX_ELEMENTS {
        return Err(AttentionError::OracleTooLarge {
            elements,
            limit: ORACLE_MAX_ELEMENTS,
        });
    }
    Ok(())
}
