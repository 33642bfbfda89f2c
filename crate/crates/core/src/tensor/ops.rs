use super::feature::{increment_index, row_major_strides};
use super::{FeatureTensor, Matrix2D, Permutation, TensorError};

/// Tally of arithmetic performed by the kernels.
///
/// `macs` counts multiply-accumulates in [`matmul`] and [`channel_linear`]
/// (bias additions are not counted). `softmax_entries` counts entries passed
/// through [`row_softmax`].
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub macs: u64,
    pub softmax_entries: u64,
}

/// Reorders axes so that output axis `i` is source axis `p.order()[i]`.
pub fn permute_axes(x: &FeatureTensor, p: &Permutation) -> Result<FeatureTensor, TensorError> {
    if p.rank() != x.rank() {
        return Err(TensorError::RankMismatch {
            expected: x.rank(),
            actual: p.rank(),
        });
    }
    let src_strides = x.strides();
    let out_shape: Vec<usize> = p.order().iter().map(|&a| x.shape()[a]).collect();
    if p.is_identity() {
        return FeatureTensor::new(out_shape, x.data().to_vec());
    }
    let gather: Vec<usize> = p.order().iter().map(|&a| src_strides[a]).collect();
    let src = x.data();
    let mut data = Vec::with_capacity(src.len());
    let mut index = vec![0usize; out_shape.len()];
    for _ in 0..src.len() {
        let off: usize = index.iter().zip(&gather).map(|(i, s)| i * s).sum();
        data.push(src[off]);
        increment_index(&mut index, &out_shape);
    }
    FeatureTensor::new(out_shape, data)
}

/// `u(x, p)`: permute, then flatten every axis after the leading one.
pub fn unfold(x: &FeatureTensor, p: &Permutation) -> Result<Matrix2D, TensorError> {
    let permuted = permute_axes(x, p)?;
    let rows = permuted.shape()[0];
    let cols = permuted.len() / rows;
    Matrix2D::new(rows, cols, permuted.into_data())
}

/// `f(m, p)`: inverse of [`unfold`] for a tensor of `original_shape`.
pub fn fold(
    m: &Matrix2D,
    p: &Permutation,
    original_shape: &[usize],
) -> Result<FeatureTensor, TensorError> {
    if p.rank() != original_shape.len() {
        return Err(TensorError::RankMismatch {
            expected: original_shape.len(),
            actual: p.rank(),
        });
    }
    let total: usize = original_shape.iter().product();
    if m.rows() * m.cols() != total {
        return Err(TensorError::DataLength {
            expected: total,
            actual: m.rows() * m.cols(),
        });
    }
    let lead = original_shape[p.leading_axis()];
    if m.rows() != lead {
        return Err(TensorError::FoldRows {
            rows: m.rows(),
            expected: lead,
        });
    }
    let permuted_shape: Vec<usize> = p.order().iter().map(|&a| original_shape[a]).collect();
    let permuted = FeatureTensor::new(permuted_shape, m.data().to_vec())?;
    permute_axes(&permuted, &p.inverse())
}

pub fn matmul(a: &Matrix2D, b: &Matrix2D) -> Result<Matrix2D, TensorError> {
    matmul_counted(a, b, &mut OpCounter::default())
}

/// Matrix product with each output entry accumulated over the inner index in
/// ascending order.
pub fn matmul_counted(
    a: &Matrix2D,
    b: &Matrix2D,
    counter: &mut OpCounter,
) -> Result<Matrix2D, TensorError> {
    if a.cols() != b.rows() {
        return Err(TensorError::InnerDimension {
            left: a.cols(),
            right: b.rows(),
        });
    }
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let out_row = &mut out[i * m..(i + 1) * m];
        for (l, &aval) in ad[i * k..(i + 1) * k].iter().enumerate() {
            let b_row = &bd[l * m..(l + 1) * m];
            for (o, &bval) in out_row.iter_mut().zip(b_row) {
                *o += aval * bval;
            }
        }
        counter.macs += (k * m) as u64;
    }
    Matrix2D::new(n, m, out)
}

pub fn row_softmax(m: &Matrix2D) -> Result<Matrix2D, TensorError> {
    row_softmax_counted(m, &mut OpCounter::default())
}

/// Row-wise softmax with max subtraction.
pub fn row_softmax_counted(m: &Matrix2D, counter: &mut OpCounter) -> Result<Matrix2D, TensorError> {
    if let Some(pos) = m.data().iter().position(|v| !v.is_finite()) {
        return Err(TensorError::NonFinite {
            row: pos / m.cols(),
            col: pos % m.cols(),
        });
    }
    let cols = m.cols();
    let mut out = Vec::with_capacity(m.data().len());
    for i in 0..m.rows() {
        let row = m.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        out.extend(row.iter().map(|&v| (v - max).exp()));
        let denom: f64 = out[start..].iter().sum();
        for v in &mut out[start..] {
            *v /= denom;
        }
    }
    counter.softmax_entries += m.data().len() as u64;
    Matrix2D::new(m.rows(), cols, out)
}

pub fn channel_linear(
    x: &FeatureTensor,
    w: &Matrix2D,
    b: Option<&[f64]>,
) -> Result<FeatureTensor, TensorError> {
    channel_linear_counted(x, w, b, &mut OpCounter::default())
}

/// Applies `y[.., o] = sum_c w[o, c] * x[.., c] + b[o]` at every position.
pub fn channel_linear_counted(
    x: &FeatureTensor,
    w: &Matrix2D,
    b: Option<&[f64]>,
    counter: &mut OpCounter,
) -> Result<FeatureTensor, TensorError> {
    let c_in = x.channels();
    if w.cols() != c_in {
        return Err(TensorError::ChannelMismatch {
            expected: c_in,
            actual: w.cols(),
        });
    }
    if let Some(b) = b {
        if b.len() != w.rows() {
            return Err(TensorError::BiasLength {
                expected: w.rows(),
                actual: b.len(),
            });
        }
    }
    let c_out = w.rows();
    let positions = x.positions();
    let mut data = Vec::with_capacity(positions * c_out);
    for pixel in x.data().chunks_exact(c_in) {
        for o in 0..c_out {
            let mut acc = 0.0;
            for (wv, xv) in w.row(o).iter().zip(pixel) {
                acc += wv * xv;
            }
            if let Some(b) = b {
                acc += b[o];
            }
            data.push(acc);
        }
    }
    counter.macs += (positions * c_in * c_out) as u64;
    let mut shape = x.shape().to_vec();
    *shape.last_mut().expect("rank >= 2") = c_out;
    FeatureTensor::new(shape, data)
}

/// Row-major strides for an arbitrary shape.
pub fn strides_of(shape: &[usize]) -> Vec<usize> {
    row_major_strides(shape)
}
