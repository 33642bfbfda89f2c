use serde::{Deserialize, Serialize};

use super::AttentionError;
use crate::tensor::{
    channel_linear_counted, FeatureTensor, Matrix2D, OpCounter, Permutation, TensorError,
};

/// A channel-axis affine map `y = W x + b`, applied independently at every
/// position. `weight` is `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMapParams {
    pub weight: Matrix2D,
    pub bias: Option<Vec<f64>>,
}

impl LinearMapParams {
    pub fn new(weight: Matrix2D) -> Self {
        Self { weight, bias: None }
    }

    pub fn with_bias(weight: Matrix2D, bias: Vec<f64>) -> Result<Self, TensorError> {
        if bias.len() != weight.rows() {
            return Err(TensorError::BiasLength {
                expected: weight.rows(),
                actual: bias.len(),
            });
        }
        Ok(Self {
            weight,
            bias: Some(bias),
        })
    }

    pub fn identity(channels: usize) -> Self {
        Self::new(Matrix2D::identity(channels).expect("channels > 0"))
    }

    pub fn zeros(out_channels: usize, in_channels: usize) -> Self {
        Self::new(Matrix2D::zeros(out_channels, in_channels).expect("nonzero dims"))
    }

    pub fn in_channels(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_channels(&self) -> usize {
        self.weight.rows()
    }

    pub fn apply(&self, x: &FeatureTensor) -> Result<FeatureTensor, TensorError> {
        self.apply_counted(x, &mut OpCounter::default())
    }

    pub fn apply_counted(
        &self,
        x: &FeatureTensor,
        counter: &mut OpCounter,
    ) -> Result<FeatureTensor, TensorError> {
        channel_linear_counted(x, &self.weight, self.bias.as_deref(), counter)
    }
}

/// The `theta` / `phi` pair used to build one mode's affinity logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub theta: LinearMapParams,
    pub phi: LinearMapParams,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FAOptions {
    /// Apply `g` before every aggregation stage instead of once up front.
    pub reapply_g: bool,
    /// Add the input to the output.
    pub residual: bool,
}

/// Parameters of a folded attention block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FAParams {
    pub theta: LinearMapParams,
    pub phi: LinearMapParams,
    pub g: LinearMapParams,
    /// Aggregation order; `None` is one mode-first permutation per axis in
    /// axis order.
    pub mode_order: Option<Vec<Permutation>>,
    /// Per-axis `theta`/`phi` overriding the shared pair, indexed by axis.
    pub per_mode: Option<Vec<Embedding>>,
    pub options: FAOptions,
}

impl FAParams {
    pub fn new(theta: LinearMapParams, phi: LinearMapParams, g: LinearMapParams) -> Self {
        Self {
            theta,
            phi,
            g,
            mode_order: None,
            per_mode: None,
            options: FAOptions::default(),
        }
    }

    /// `theta = phi = 0` and `g = I`.
    pub fn uniform_identity(channels: usize) -> Self {
        Self::new(
            LinearMapParams::zeros(channels, channels),
            LinearMapParams::zeros(channels, channels),
            LinearMapParams::identity(channels),
        )
    }

    pub fn with_mode_order(mut self, order: Vec<Permutation>) -> Self {
        self.mode_order = Some(order);
        self
    }

    pub fn with_options(mut self, options: FAOptions) -> Self {
        self.options = options;
        self
    }

    pub fn embed_dim(&self) -> usize {
        self.theta.out_channels()
    }

    pub fn mode_order_for(&self, rank: usize) -> Vec<Permutation> {
        self.mode_order
            .clone()
            .unwrap_or_else(|| Permutation::default_mode_order(rank))
    }

    /// The `theta`/`phi` pair for `axis`.
    pub fn embedding_for(&self, axis: usize) -> (&LinearMapParams, &LinearMapParams) {
        match self.per_mode.as_ref().and_then(|m| m.get(axis)) {
            Some(e) => (&e.theta, &e.phi),
            None => (&self.theta, &self.phi),
        }
    }

    /// Checks the channel maps against the input's channel count.
    pub(crate) fn validate_maps(&self, channels: usize) -> Result<(), AttentionError> {
        let check_pair = |theta: &LinearMapParams, phi: &LinearMapParams| {
            if theta.in_channels() != channels || phi.in_channels() != channels {
                return Err(AttentionError::Params(format!(
                    "theta/phi expect {}/{} input channels, tensor has {channels}",
                    theta.in_channels(),
                    phi.in_channels()
                )));
            }
            if theta.out_channels() != phi.out_channels() {
                return Err(AttentionError::Params(format!(
                    "theta and phi embed to different sizes ({} vs {})",
                    theta.out_channels(),
                    phi.out_channels()
                )));
            }
            Ok(())
        };
        check_pair(&self.theta, &self.phi)?;
        if let Some(per_mode) = &self.per_mode {
            for e in per_mode {
                check_pair(&e.theta, &e.phi)?;
            }
        }
        if self.g.in_channels() != channels || self.g.out_channels() != channels {
            return Err(AttentionError::Params(format!(
                "g must map {channels} channels to {channels}, got {} -> {}",
                self.g.in_channels(),
                self.g.out_channels()
            )));
        }
        Ok(())
    }

    /// Validates everything folded attention needs for an input of `shape`,
    /// returning the resolved mode order.
    pub(crate) fn validate_folded(
        &self,
        shape: &[usize],
    ) -> Result<Vec<Permutation>, AttentionError> {
        let rank = shape.len();
        let channels = shape[rank - 1];
        self.validate_maps(channels)?;
        if let Some(per_mode) = &self.per_mode {
            if per_mode.len() != rank {
                return Err(AttentionError::Params(format!(
                    "per-mode embeddings given for {} axes, tensor has {rank}",
                    per_mode.len()
                )));
            }
        }
        let order = self.mode_order_for(rank);
        let mut covered = vec![false; rank];
        for p in &order {
            if p.rank() != rank {
                return Err(TensorError::RankMismatch {
                    expected: rank,
                    actual: p.rank(),
                }
                .into());
            }
            let lead = p.leading_axis();
            if covered[lead] {
                return Err(AttentionError::ModeOrder(format!(
                    "axis {lead} appears twice"
                )));
            }
            covered[lead] = true;
        }
        if let Some(missing) = covered.iter().position(|c| !c) {
            return Err(AttentionError::ModeOrder(format!(
                "axis {missing} is never aggregated"
            )));
        }
        // The channel sub-affinity is embed x embed but must mix `channels` entries.
        let (theta, _) = self.embedding_for(rank - 1);
        if theta.out_channels() != channels {
            return Err(AttentionError::Params(format!(
                "channel-mode sub-affinity needs embed_dim == channels ({} != {channels})",
                theta.out_channels()
            )));
        }
        Ok(order)
    }
}
