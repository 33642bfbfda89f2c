//! Brute-force reference implementations. Nothing here calls the library's
//! kernels; everything is written as plain scalar loops over raw buffers.

#![allow(dead_code)]

use folded_attention::{FAParams, FeatureTensor, Matrix2D};

pub fn naive_matmul(a: &Matrix2D, b: &Matrix2D) -> Vec<f64> {
    let mut out = vec![0.0; a.rows() * b.cols()];
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.data()[i * a.cols() + k] * b.data()[k * b.cols() + j];
            }
            out[i * b.cols() + j] = s;
        }
    }
    out
}

pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// `w` is `out x in`; returns `out` values for one pixel.
pub fn apply_weight(w: &Matrix2D, pixel: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|o| {
            (0..w.cols())
                .map(|c| w.data()[o * w.cols() + c] * pixel[c])
                .sum()
        })
        .collect()
}

pub fn channel_map(x: &FeatureTensor, w: &Matrix2D) -> Vec<f64> {
    let c = x.channels();
    x.data()
        .chunks(c)
        .flat_map(|p| apply_weight(w, p))
        .collect()
}

/// Self-attention with the full `N x N` affinity built by nested loops.
pub fn sa_nested_loops(x: &FeatureTensor, params: &FAParams) -> Vec<f64> {
    let c = x.channels();
    let n = x.len() / c;
    let t = channel_map(x, &params.theta.weight);
    let p = channel_map(x, &params.phi.weight);
    let g = channel_map(x, &params.g.weight);
    let e = params.theta.weight.rows();
    let mut z = vec![0.0; n * c];
    for i in 0..n {
        let logits: Vec<f64> = (0..n)
            .map(|j| (0..e).map(|k| t[i * e + k] * p[j * e + k]).sum())
            .collect();
        let a = softmax_row(&logits);
        for ch in 0..c {
            z[i * c + ch] = (0..n).map(|j| a[j] * g[j * c + ch]).sum();
        }
    }
    z
}

/// Rank-4 folded attention with every sub-affinity formed entry by entry
/// and the output as an explicit 8-deep sum over
/// `A^h[i,i'] A^w[j,j'] A^d[k,k'] A^c[q,q'] g(X)[i',j',k',q']`.
pub fn fa_scalar_rank4(x: &FeatureTensor, params: &FAParams) -> Vec<f64> {
    let s = x.shape();
    let (hh, ww, dd, cc) = (s[0], s[1], s[2], s[3]);
    let at = |i: usize, j: usize, k: usize, q: usize| ((i * ww + j) * dd + k) * cc + q;
    let t = channel_map(x, &params.theta.weight);
    let p = channel_map(x, &params.phi.weight);
    let g = channel_map(x, &params.g.weight);

    let mut ah = vec![vec![0.0; hh]; hh];
    for (i, row) in ah.iter_mut().enumerate() {
        let mut logits = vec![0.0; hh];
        for (i2, l) in logits.iter_mut().enumerate() {
            for j in 0..ww {
                for k in 0..dd {
                    for q in 0..cc {
                        *l += t[at(i, j, k, q)] * p[at(i2, j, k, q)];
                    }
                }
            }
        }
        *row = softmax_row(&logits);
    }
    let mut aw = vec![vec![0.0; ww]; ww];
    for (j, row) in aw.iter_mut().enumerate() {
        let mut logits = vec![0.0; ww];
        for (j2, l) in logits.iter_mut().enumerate() {
            for i in 0..hh {
                for k in 0..dd {
                    for q in 0..cc {
                        *l += t[at(i, j, k, q)] * p[at(i, j2, k, q)];
                    }
                }
            }
        }
        *row = softmax_row(&logits);
    }
    let mut ad = vec![vec![0.0; dd]; dd];
    for (k, row) in ad.iter_mut().enumerate() {
        let mut logits = vec![0.0; dd];
        for (k2, l) in logits.iter_mut().enumerate() {
            for i in 0..hh {
                for j in 0..ww {
                    for q in 0..cc {
                        *l += t[at(i, j, k, q)] * p[at(i, j, k2, q)];
                    }
                }
            }
        }
        *row = softmax_row(&logits);
    }
    let mut ac = vec![vec![0.0; cc]; cc];
    for (q, row) in ac.iter_mut().enumerate() {
        let mut logits = vec![0.0; cc];
        for (q2, l) in logits.iter_mut().enumerate() {
            for i in 0..hh {
                for j in 0..ww {
                    for k in 0..dd {
                        *l += t[at(i, j, k, q)] * p[at(i, j, k, q2)];
                    }
                }
            }
        }
        *row = softmax_row(&logits);
    }

    let mut z = vec![0.0; x.len()];
    for i in 0..hh {
        for j in 0..ww {
            for k in 0..dd {
                for q in 0..cc {
                    let mut acc = 0.0;
                    for i2 in 0..hh {
                        for j2 in 0..ww {
                            for k2 in 0..dd {
                                for q2 in 0..cc {
                                    acc += ah[i][i2]
                                        * aw[j][j2]
                                        * ad[k][k2]
                                        * ac[q][q2]
                                        * g[at(i2, j2, k2, q2)];
                                }
                            }
                        }
                    }
                    z[at(i, j, k, q)] = acc;
                }
            }
        }
    }
    z
}

/// Two-axis case on a `(W, C)` input: `Z_ij = sum_pq a^w_i[p] a^c_j[q] g(X)_pq`.
pub fn fa_two_mode_loops(x: &FeatureTensor, params: &FAParams) -> Vec<f64> {
    let (ww, cc) = (x.shape()[0], x.shape()[1]);
    let t = channel_map(x, &params.theta.weight);
    let p = channel_map(x, &params.phi.weight);
    let g = channel_map(x, &params.g.weight);
    let aw: Vec<Vec<f64>> = (0..ww)
        .map(|i| {
            let logits: Vec<f64> = (0..ww)
                .map(|i2| (0..cc).map(|q| t[i * cc + q] * p[i2 * cc + q]).sum())
                .collect();
            softmax_row(&logits)
        })
        .collect();
    let ac: Vec<Vec<f64>> = (0..cc)
        .map(|j| {
            let logits: Vec<f64> = (0..cc)
                .map(|j2| (0..ww).map(|w| t[w * cc + j] * p[w * cc + j2]).sum())
                .collect();
            softmax_row(&logits)
        })
        .collect();
    let mut z = vec![0.0; ww * cc];
    for i in 0..ww {
        for j in 0..cc {
            let mut acc = 0.0;
            for pp in 0..ww {
                for q in 0..cc {
                    acc += aw[i][pp] * ac[j][q] * g[pp * cc + q];
                }
            }
            z[i * cc + j] = acc;
        }
    }
    z
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
