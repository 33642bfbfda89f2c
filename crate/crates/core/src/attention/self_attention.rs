use super::{AttentionError, FAParams};
use crate::tensor::{matmul, row_softmax, FeatureTensor, Matrix2D};

/// Budget for the `N x N` affinity of [`self_attention`] unless overridden.
pub const DEFAULT_SA_BUDGET_BYTES: u64 = 1 << 30;

/// Bytes the `N x N` affinity of `x` would take at `f64`.
pub fn sa_affinity_bytes(x_shape: &[usize]) -> u128 {
    let n: u128 = x_shape[..x_shape.len() - 1]
        .iter()
        .map(|&d| d as u128)
        .product();
    n * n * std::mem::size_of::<f64>() as u128
}

/// Embedded-Gaussian self-attention over pixels:
/// `Z = SM(theta(X) phi(X)^T) g(X)` with `X` viewed as `N x C`.
pub fn self_attention(
    x: &FeatureTensor,
    params: &FAParams,
) -> Result<FeatureTensor, AttentionError> {
    self_attention_with_budget(x, params, DEFAULT_SA_BUDGET_BYTES)
}

pub fn self_attention_with_budget(
    x: &FeatureTensor,
    params: &FAParams,
    budget_bytes: u64,
) -> Result<FeatureTensor, AttentionError> {
    let required = sa_affinity_bytes(x.shape());
    if required > budget_bytes as u128 {
        return Err(AttentionError::MemoryBudget {
            required,
            budget: budget_bytes,
        });
    }
    params.validate_maps(x.channels())?;
    let n = x.positions();
    let as_rows = |t: FeatureTensor| {
        let c = t.channels();
        Matrix2D::new(n, c, t.into_data())
    };
    let theta = as_rows(params.theta.apply(x)?)?;
    let phi = as_rows(params.phi.apply(x)?)?;
    let g = as_rows(params.g.apply(x)?)?;
    let a = row_softmax(&matmul(&theta, &phi.transpose())?)?;
    let z = matmul(&a, &g)?;
    let z = FeatureTensor::new(x.shape().to_vec(), z.into_data())?;
    if params.options.residual {
        return Ok(z.zip_with(x, |a, b| a + b)?);
    }
    Ok(z)
}
