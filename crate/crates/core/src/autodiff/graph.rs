use super::{backward, AutodiffError, GradResult, NodeId, Tape};
use crate::attention::{FAOptions, FAParams, LinearMapParams};
use crate::tensor::{FeatureTensor, Permutation};

/// A forward computation expressed over tape primitives. `inputs` are the
/// leaf handles in the order the caller supplied them.
pub trait Graph {
    fn record(&self, tape: &mut Tape, inputs: &[NodeId]) -> Result<NodeId, AutodiffError>;
}

impl<F> Graph for F
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, AutodiffError>,
{
    fn record(&self, tape: &mut Tape, inputs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        self(tape, inputs)
    }
}

/// A named graph input.
pub type NamedInput = (String, FeatureTensor);

/// A finished forward pass.
#[derive(Debug, Clone)]
pub struct Recording {
    pub tape: Tape,
    pub inputs: Vec<NodeId>,
    pub output: NodeId,
}

impl Recording {
    pub fn output_value(&self) -> &FeatureTensor {
        self.tape.value(self.output)
    }

    pub fn backward(&self, seed: &FeatureTensor) -> Result<GradResult, AutodiffError> {
        backward(&self.tape, self.output, seed)
    }
}

pub fn record_and_run(
    graph: &impl Graph,
    inputs: &[NamedInput],
) -> Result<(FeatureTensor, Recording), AutodiffError> {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs
        .iter()
        .map(|(name, value)| tape.leaf(name.clone(), value.clone()))
        .collect();
    let output = graph.record(&mut tape, &ids)?;
    let value = tape.value(output).clone();
    Ok((
        value,
        Recording {
            tape,
            inputs: ids,
            output,
        },
    ))
}

/// Folded attention over tape primitives, in the same kernel order as
/// [`crate::attention::folded_attention`].
///
/// Inputs, in order: `x`, `theta`, `phi`, `g` weights, then any biases
/// present in the parameters (`theta.bias`, `phi.bias`, `g.bias`).
#[derive(Debug, Clone)]
pub struct FoldedAttentionGraph {
    pub shape: Vec<usize>,
    pub mode_order: Vec<Permutation>,
    pub options: FAOptions,
    pub biases: [bool; 3],
}

impl FoldedAttentionGraph {
    pub fn new(params: &FAParams, shape: &[usize]) -> Result<Self, AutodiffError> {
        if params.per_mode.is_some() {
            return Err(AutodiffError::Unsupported(
                "per-mode theta/phi embeddings".into(),
            ));
        }
        let mode_order = params.validate_folded(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            mode_order,
            options: params.options,
            biases: [
                params.theta.bias.is_some(),
                params.phi.bias.is_some(),
                params.g.bias.is_some(),
            ],
        })
    }

    /// The named inputs this graph expects.
    pub fn inputs(x: &FeatureTensor, params: &FAParams) -> Vec<NamedInput> {
        let mut v = vec![
            ("x".to_string(), x.clone()),
            (
                "theta".to_string(),
                params.theta.weight.clone().into_tensor(),
            ),
            ("phi".to_string(), params.phi.weight.clone().into_tensor()),
            ("g".to_string(), params.g.weight.clone().into_tensor()),
        ];
        let maps: [(&str, &LinearMapParams); 3] = [
            ("theta", &params.theta),
            ("phi", &params.phi),
            ("g", &params.g),
        ];
        for (name, map) in maps {
            if let Some(b) = &map.bias {
                let t = FeatureTensor::new(vec![1, b.len()], b.clone()).expect("nonempty bias");
                v.push((format!("{name}.bias"), t));
            }
        }
        v
    }
}

impl Graph for FoldedAttentionGraph {
    fn record(&self, tape: &mut Tape, inputs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let expected = 4 + self.biases.iter().filter(|b| **b).count();
        if inputs.len() != expected {
            return Err(AutodiffError::InputCount {
                expected,
                actual: inputs.len(),
            });
        }
        let (x, theta, phi, g) = (inputs[0], inputs[1], inputs[2], inputs[3]);
        let mut extra = inputs[4..].iter().copied();
        let mut bias = |present: bool| if present { extra.next() } else { None };
        let (tb, pb, gb) = (
            bias(self.biases[0]),
            bias(self.biases[1]),
            bias(self.biases[2]),
        );

        let tx = tape.channel_linear(x, theta, tb)?;
        let px = tape.channel_linear(x, phi, pb)?;
        let mut subs = Vec::with_capacity(self.mode_order.len());
        for p in &self.mode_order {
            let ut = tape.unfold(tx, p)?;
            let up = tape.unfold(px, p)?;
            let upt = tape.transpose(up)?;
            let logits = tape.matmul(ut, upt)?;
            subs.push(tape.row_softmax(logits)?);
        }

        let mut y = if self.options.reapply_g {
            x
        } else {
            tape.channel_linear(x, g, gb)?
        };
        for (p, &a) in self.mode_order.iter().zip(&subs) {
            if self.options.reapply_g {
                y = tape.channel_linear(y, g, gb)?;
            }
            let uy = tape.unfold(y, p)?;
            let mixed = tape.matmul(a, uy)?;
            y = tape.fold(mixed, p, &self.shape)?;
        }
        if self.options.residual {
            y = tape.add(y, x)?;
        }
        Ok(y)
    }
}

/// Appends `sum(z * z)` to another graph.
#[derive(Debug, Clone)]
pub struct SumOfSquares<G>(pub G);

impl<G: Graph> Graph for SumOfSquares<G> {
    fn record(&self, tape: &mut Tape, inputs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let z = self.0.record(tape, inputs)?;
        let sq = tape.mul(z, z)?;
        tape.sum(sq)
    }
}

/// Appends `sum(z)` to another graph.
#[derive(Debug, Clone)]
pub struct SumAll<G>(pub G);

impl<G: Graph> Graph for SumAll<G> {
    fn record(&self, tape: &mut Tape, inputs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let z = self.0.record(tape, inputs)?;
        tape.sum(z)
    }
}
