//! Fixtures shared by the benchmarks.

use folded_attention::attention::sa_affinity_bytes;
use folded_attention::init::{random_instance, Instance};

/// Seed for every benchmark input.
pub const BENCH_SEED: u64 = 0x5eed;

/// Forward-pass sizes, `H,W,D,C`. The last one is too big for the dense
/// self-attention affinity under the default budget.
pub const FORWARD_SHAPES: [[usize; 4]; 4] =
    [[4, 4, 4, 8], [8, 8, 8, 8], [16, 16, 16, 8], [64, 64, 64, 8]];

pub fn fixture(shape: &[usize]) -> Instance {
    random_instance(shape, BENCH_SEED, 0).expect("benchmark shapes are valid")
}

/// Whether the dense baseline fits in `budget` bytes at `shape`.
pub fn sa_fits(shape: &[usize], budget: u64) -> bool {
    sa_affinity_bytes(shape) <= budget as u128
}

pub fn label(shape: &[usize]) -> String {
    shape
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}
