use super::AutodiffError;
use crate::tensor::{
    channel_linear, fold, matmul, permute_axes, row_softmax, unfold, FeatureTensor, Matrix2D,
    Permutation,
};

/// Handle to a recorded value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A recorded primitive application.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Leaf {
        name: String,
    },
    Permute {
        input: NodeId,
        p: Permutation,
    },
    Unfold {
        input: NodeId,
        p: Permutation,
    },
    Fold {
        input: NodeId,
        p: Permutation,
        shape: Vec<usize>,
    },
    Transpose {
        input: NodeId,
    },
    MatMul {
        a: NodeId,
        b: NodeId,
    },
    /// The node's value is the softmax output, which is all the adjoint needs.
    RowSoftmax {
        input: NodeId,
    },
    ChannelLinear {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    /// Sum of all entries, stored as a `1 x 1` tensor.
    Sum {
        input: NodeId,
    },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf { .. } => "leaf",
            Op::Permute { .. } => "permute",
            Op::Unfold { .. } => "unfold",
            Op::Fold { .. } => "fold",
            Op::Transpose { .. } => "transpose",
            Op::MatMul { .. } => "matmul",
            Op::RowSoftmax { .. } => "row_softmax",
            Op::ChannelLinear { .. } => "channel_linear",
            Op::Add { .. } => "add",
            Op::Mul { .. } => "mul",
            Op::Sum { .. } => "sum",
        }
    }

    pub fn inputs(&self) -> Vec<NodeId> {
        match *self {
            Op::Leaf { .. } => vec![],
            Op::Permute { input, .. }
            | Op::Unfold { input, .. }
            | Op::Fold { input, .. }
            | Op::Transpose { input }
            | Op::RowSoftmax { input }
            | Op::Sum { input } => vec![input],
            Op::MatMul { a, b } | Op::Add { a, b } | Op::Mul { a, b } => vec![a, b],
            Op::ChannelLinear { x, w, b } => {
                let mut v = vec![x, w];
                v.extend(b);
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub op: Op,
    pub value: FeatureTensor,
}

/// Append-only record of a forward pass. Inputs are always recorded before
/// the nodes that consume them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tape {
    nodes: Vec<Node>,
}

pub(crate) fn as_matrix(t: &FeatureTensor) -> Result<Matrix2D, AutodiffError> {
    Ok(Matrix2D::from_tensor(t.clone())?)
}

fn bias_slice(b: &FeatureTensor) -> &[f64] {
    b.data()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn value(&self, id: NodeId) -> &FeatureTensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: FeatureTensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn check(&self, id: NodeId) -> Result<(), AutodiffError> {
        if id.0 >= self.nodes.len() {
            return Err(AutodiffError::UnknownNode(id.0));
        }
        Ok(())
    }

    pub fn leaf(&mut self, name: impl Into<String>, value: FeatureTensor) -> NodeId {
        self.push(Op::Leaf { name: name.into() }, value)
    }

    pub fn permute(&mut self, input: NodeId, p: &Permutation) -> Result<NodeId, AutodiffError> {
        self.record(Op::Permute {
            input,
            p: p.clone(),
        })
    }

    pub fn unfold(&mut self, input: NodeId, p: &Permutation) -> Result<NodeId, AutodiffError> {
        self.record(Op::Unfold {
            input,
            p: p.clone(),
        })
    }

    pub fn fold(
        &mut self,
        input: NodeId,
        p: &Permutation,
        shape: &[usize],
    ) -> Result<NodeId, AutodiffError> {
        self.record(Op::Fold {
            input,
            p: p.clone(),
            shape: shape.to_vec(),
        })
    }

    pub fn transpose(&mut self, input: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(Op::Transpose { input })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(Op::MatMul { a, b })
    }

    pub fn row_softmax(&mut self, input: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(Op::RowSoftmax { input })
    }

    pub fn channel_linear(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    ) -> Result<NodeId, AutodiffError> {
        self.record(Op::ChannelLinear { x, w, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(Op::Add { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(Op::Mul { a, b })
    }

    pub fn sum(&mut self, input: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(Op::Sum { input })
    }

    fn record(&mut self, op: Op) -> Result<NodeId, AutodiffError> {
        for id in op.inputs() {
            self.check(id)?;
        }
        let value = evaluate(&op, |id| &self.nodes[id.0].value)?;
        Ok(self.push(op, value))
    }

    /// Re-evaluates every recorded node from the stored leaf values.
    pub fn replay(&self) -> Result<Tape, AutodiffError> {
        let mut out = Tape::new();
        for node in &self.nodes {
            let value = match &node.op {
                Op::Leaf { .. } => node.value.clone(),
                op => evaluate(op, |id| &out.nodes[id.0].value)?,
            };
            out.push(node.op.clone(), value);
        }
        Ok(out)
    }
}

/// Forward evaluation of one primitive, using the same kernels as the
/// untaped code paths.
fn evaluate<'a>(
    op: &Op,
    value: impl Fn(NodeId) -> &'a FeatureTensor,
) -> Result<FeatureTensor, AutodiffError> {
    Ok(match op {
        Op::Leaf { .. } => unreachable!("leaves carry their own value"),
        Op::Permute { input, p } => permute_axes(value(*input), p)?,
        Op::Unfold { input, p } => unfold(value(*input), p)?.into_tensor(),
        Op::Fold { input, p, shape } => fold(&as_matrix(value(*input))?, p, shape)?,
        Op::Transpose { input } => as_matrix(value(*input))?.transpose().into_tensor(),
        Op::MatMul { a, b } => {
            matmul(&as_matrix(value(*a))?, &as_matrix(value(*b))?)?.into_tensor()
        }
        Op::RowSoftmax { input } => row_softmax(&as_matrix(value(*input))?)?.into_tensor(),
        Op::ChannelLinear { x, w, b } => {
            let w = as_matrix(value(*w))?;
            channel_linear(value(*x), &w, b.map(|b| bias_slice(value(b))))?
        }
        Op::Add { a, b } => value(*a).zip_with(value(*b), |x, y| x + y)?,
        Op::Mul { a, b } => value(*a).zip_with(value(*b), |x, y| x * y)?,
        Op::Sum { input } => FeatureTensor::new(vec![1, 1], vec![value(*input).sum()])?,
    })
}
