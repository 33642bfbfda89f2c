//! Scalar loop implementations kept independent of the matrix kernels, used
//! as ground truth by the verification harness.

use super::{AttentionError, FAParams};
use crate::tensor::FeatureTensor;

/// Self-attention evaluated entry by entry: explicit logits, explicit
/// softmax rows, explicit weighted sums.
pub fn explicit_self_attention(
    x: &FeatureTensor,
    params: &FAParams,
) -> Result<FeatureTensor, AttentionError> {
    params.validate_maps(x.channels())?;
    let c = x.channels();
    let n = x.positions();
    let e = params.theta.out_channels();
    let pixel = |i: usize| &x.data()[i * c..(i + 1) * c];
    let embed = |w: &crate::tensor::Matrix2D, b: &Option<Vec<f64>>, i: usize, o: usize| {
        let mut acc = b.as_ref().map_or(0.0, |b| b[o]);
        for (k, &xv) in pixel(i).iter().enumerate() {
            acc += w.get(o, k) * xv;
        }
        acc
    };

    let mut affinity = vec![vec![0.0; n]; n];
    for (i, row) in affinity.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let mut dot = 0.0;
            for o in 0..e {
                dot += embed(&params.theta.weight, &params.theta.bias, i, o)
                    * embed(&params.phi.weight, &params.phi.bias, j, o);
            }
            *entry = dot;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|&l| (l - max).exp()).sum();
        for entry in row.iter_mut() {
            *entry = (*entry - max).exp() / denom;
        }
    }

    let mut out = vec![0.0; n * c];
    for i in 0..n {
        for ch in 0..c {
            let mut acc = 0.0;
            for (j, &a) in affinity[i].iter().enumerate() {
                acc += a * embed(&params.g.weight, &params.g.bias, j, ch);
            }
            out[i * c + ch] = acc;
        }
    }
    let mut z = FeatureTensor::new(x.shape().to_vec(), out)?;
    if params.options.residual {
        z = z.zip_with(x, |a, b| a + b)?;
    }
    Ok(z)
}
