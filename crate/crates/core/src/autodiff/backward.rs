use std::collections::BTreeMap;

use super::tape::as_matrix;
use super::{AutodiffError, NodeId, Op, Tape};
use crate::tensor::{fold, matmul, permute_axes, unfold, FeatureTensor, Matrix2D};

/// Gradients of `<seed, output>` with respect to every leaf, keyed by leaf
/// name and shaped like the leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    grads: BTreeMap<String, FeatureTensor>,
}

impl GradResult {
    pub fn get(&self, name: &str) -> Option<&FeatureTensor> {
        self.grads.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FeatureTensor)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.grads.keys().map(String::as_str)
    }
}

fn accumulate(slot: &mut Option<FeatureTensor>, g: FeatureTensor) -> Result<(), AutodiffError> {
    *slot = Some(match slot.take() {
        None => g,
        Some(prev) => prev.zip_with(&g, |a, b| a + b)?,
    });
    Ok(())
}

/// Reverse sweep from `output`, visiting each node at or before it once in
/// reverse recorded order.
pub fn backward(
    tape: &Tape,
    output: NodeId,
    seed: &FeatureTensor,
) -> Result<GradResult, AutodiffError> {
    if output.0 >= tape.len() {
        return Err(AutodiffError::UnknownNode(output.0));
    }
    let out_shape = tape.value(output).shape();
    if seed.shape() != out_shape {
        return Err(AutodiffError::SeedShape {
            expected: out_shape.to_vec(),
            actual: seed.shape().to_vec(),
        });
    }

    let mut grads: Vec<Option<FeatureTensor>> = vec![None; output.0 + 1];
    grads[output.0] = Some(seed.clone());
    let mut leaves = BTreeMap::new();

    for idx in (0..=output.0).rev() {
        let node = tape.node(NodeId(idx));
        let Some(g) = grads[idx].take() else {
            if let Op::Leaf { name } = &node.op {
                leaves.insert(
                    name.clone(),
                    FeatureTensor::zeros(node.value.shape().to_vec())?,
                );
            }
            continue;
        };
        if !g.is_finite() {
            return Err(AutodiffError::NonFinite { node: idx });
        }
        match &node.op {
            Op::Leaf { name } => {
                leaves.insert(name.clone(), g);
            }
            Op::Permute { input, p } => {
                accumulate(&mut grads[input.0], permute_axes(&g, &p.inverse())?)?;
            }
            Op::Unfold { input, p } => {
                let shape = tape.value(*input).shape().to_vec();
                accumulate(&mut grads[input.0], fold(&as_matrix(&g)?, p, &shape)?)?;
            }
            Op::Fold { input, p, .. } => {
                accumulate(&mut grads[input.0], unfold(&g, p)?.into_tensor())?;
            }
            Op::Transpose { input } => {
                accumulate(
                    &mut grads[input.0],
                    as_matrix(&g)?.transpose().into_tensor(),
                )?;
            }
            Op::MatMul { a, b } => {
                let gm = as_matrix(&g)?;
                let am = as_matrix(tape.value(*a))?;
                let bm = as_matrix(tape.value(*b))?;
                let ga = matmul(&gm, &bm.transpose())?;
                let gb = matmul(&am.transpose(), &gm)?;
                accumulate(&mut grads[a.0], ga.into_tensor())?;
                accumulate(&mut grads[b.0], gb.into_tensor())?;
            }
            Op::RowSoftmax { input } => {
                let s = &node.value;
                let cols = s.shape()[1];
                let mut out = Vec::with_capacity(s.len());
                for (gr, sr) in g.data().chunks_exact(cols).zip(s.data().chunks_exact(cols)) {
                    let dot: f64 = gr.iter().zip(sr).map(|(a, b)| a * b).sum();
                    out.extend(gr.iter().zip(sr).map(|(gv, sv)| (gv - dot) * sv));
                }
                accumulate(
                    &mut grads[input.0],
                    FeatureTensor::new(s.shape().to_vec(), out)?,
                )?;
            }
            Op::ChannelLinear { x, w, b } => {
                let xv = tape.value(*x);
                let wm = as_matrix(tape.value(*w))?;
                let (c_out, c_in) = (wm.rows(), wm.cols());
                let mut gx = vec![0.0; xv.len()];
                let mut gw = vec![0.0; c_out * c_in];
                let mut gb = vec![0.0; c_out];
                for ((gy, xp), gxp) in g
                    .data()
                    .chunks_exact(c_out)
                    .zip(xv.data().chunks_exact(c_in))
                    .zip(gx.chunks_exact_mut(c_in))
                {
                    for (o, &gyo) in gy.iter().enumerate() {
                        gb[o] += gyo;
                        let wrow = wm.row(o);
                        let gwrow = &mut gw[o * c_in..(o + 1) * c_in];
                        for c in 0..c_in {
                            gxp[c] += wrow[c] * gyo;
                            gwrow[c] += gyo * xp[c];
                        }
                    }
                }
                accumulate(
                    &mut grads[x.0],
                    FeatureTensor::new(xv.shape().to_vec(), gx)?,
                )?;
                accumulate(
                    &mut grads[w.0],
                    Matrix2D::new(c_out, c_in, gw)?.into_tensor(),
                )?;
                if let Some(b) = b {
                    let shape = tape.value(*b).shape().to_vec();
                    accumulate(&mut grads[b.0], FeatureTensor::new(shape, gb)?)?;
                }
            }
            Op::Add { a, b } => {
                accumulate(&mut grads[a.0], g.clone())?;
                accumulate(&mut grads[b.0], g)?;
            }
            Op::Mul { a, b } => {
                let ga = g.zip_with(tape.value(*b), |x, y| x * y)?;
                let gb = g.zip_with(tape.value(*a), |x, y| x * y)?;
                accumulate(&mut grads[a.0], ga)?;
                accumulate(&mut grads[b.0], gb)?;
            }
            Op::Sum { input } => {
                let shape = tape.value(*input).shape().to_vec();
                accumulate(
                    &mut grads[input.0],
                    FeatureTensor::filled(shape, g.data()[0])?,
                )?;
            }
        }
    }
    Ok(GradResult { grads: leaves })
}
