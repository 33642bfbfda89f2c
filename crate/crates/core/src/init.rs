//! Seeded random inputs and parameters.
//!
//! Every draw for trial `t` comes from a ChaCha8 stream keyed by
//! `(seed, t)`, so trials can run in any order or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::attention::{FAParams, LinearMapParams};
use crate::tensor::{FeatureTensor, Matrix2D, TensorError};

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Standard normal entries.
pub fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Result<FeatureTensor, TensorError> {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    FeatureTensor::new(shape, data)
}

/// `out x in` weight with entries drawn from `N(0, 1/sqrt(in))`, no bias.
pub fn random_linear(out: usize, input: usize, rng: &mut impl Rng) -> LinearMapParams {
    let std = 1.0 / (input as f64).sqrt();
    let w = Matrix2D::from_fn(out, input, |_, _| {
        std * rng.sample::<f64, _>(StandardNormal)
    })
    .expect("nonzero dims");
    LinearMapParams::new(w)
}

/// Shared `theta`, `phi` (embedding to `channels`) and a square `g`.
pub fn random_params(channels: usize, rng: &mut impl Rng) -> FAParams {
    let theta = random_linear(channels, channels, rng);
    let phi = random_linear(channels, channels, rng);
    let g = random_linear(channels, channels, rng);
    FAParams::new(theta, phi, g)
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub x: FeatureTensor,
    pub params: FAParams,
}

/// Input and parameters for one trial. The input is drawn first.
pub fn random_instance(shape: &[usize], seed: u64, trial: u64) -> Result<Instance, TensorError> {
    let mut rng = trial_rng(seed, trial);
    let x = random_tensor(shape.to_vec(), &mut rng)?;
    let params = random_params(x.channels(), &mut rng);
    Ok(Instance { x, params })
}
