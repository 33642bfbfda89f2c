//! Analytic FLOP and affinity-storage accounting.
//!
//! Conventions: one multiply-accumulate is 2 FLOPs; `flops` totals only
//! MAC-based terms plus the elementwise sum of dual attention. Softmax is
//! itemized separately at 4 FLOPs per entry in `softmax_flops`. Bias
//! additions are not counted. `theta`/`phi` embed to `c` channels.

mod table;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use table::{
    loglog_slope, read_csv, read_json, scaling_table, write_csv, write_json, TableRecord,
    CSV_HEADER,
};

/// Element width used for byte figures unless configured otherwise.
pub const DEFAULT_ELEMENT_BYTES: u64 = 4;
/// Affinity storage above this is reported infeasible.
pub const DEFAULT_BYTE_BUDGET: u128 = 64 << 30;
pub const MAC_FLOPS: u128 = 2;
pub const SOFTMAX_FLOPS_PER_ENTRY: u128 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("arithmetic overflow while costing {0}")]
    Overflow(&'static str),
    #[error("shape entries must be positive")]
    ZeroDim,
    #[error("scaling table needs at least one size")]
    EmptySweep,
    #[error("table I/O: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub h: u64,
    pub w: u64,
    pub d: u64,
    pub c: u64,
}

impl ShapeSpec {
    pub fn new(h: u64, w: u64, d: u64, c: u64) -> Result<Self, CostError> {
        if [h, w, d, c].contains(&0) {
            return Err(CostError::ZeroDim);
        }
        [h, w, d, c]
            .iter()
            .try_fold(1u128, |acc, &v| acc.checked_mul(v as u128))
            .ok_or(CostError::Overflow("shape"))?;
        Ok(Self { h, w, d, c })
    }

    pub fn cube(s: u64) -> Result<Self, CostError> {
        Self::new(s, s, s, s)
    }

    /// `64 x 32 x 32 x 32` channel-first, i.e. `c = 64`, `h = w = d = 32`.
    pub fn reference() -> Self {
        Self {
            h: 32,
            w: 32,
            d: 32,
            c: 64,
        }
    }

    /// Pixel count `h * w * d`.
    pub fn n(&self) -> u128 {
        self.h as u128 * self.w as u128 * self.d as u128
    }

    /// Dimension sum `h + w + d + c`.
    pub fn m(&self) -> u128 {
        self.dims().iter().sum()
    }

    pub fn total(&self) -> u128 {
        self.n() * self.c as u128
    }

    pub fn dims(&self) -> [u128; 4] {
        [self.h, self.w, self.d, self.c].map(u128::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Sa,
    Naive,
    Da,
    Fa,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Sa, Variant::Naive, Variant::Da, Variant::Fa];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Sa => "sa",
            Variant::Naive => "naive",
            Variant::Da => "da",
            Variant::Fa => "fa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostConfig {
    pub element_bytes: u64,
    pub byte_budget: u128,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            element_bytes: DEFAULT_ELEMENT_BYTES,
            byte_budget: DEFAULT_BYTE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTerm {
    pub name: String,
    pub flops: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub variant: Variant,
    pub shape: ShapeSpec,
    /// Sum of `terms`.
    pub flops: u128,
    pub terms: Vec<CostTerm>,
    pub embed_flops: u128,
    pub softmax_flops: u128,
    pub affinity_elements: u128,
    pub affinity_bytes: u128,
    /// Embedding outputs plus the attention output.
    pub activation_elements: u128,
    pub activation_bytes: u128,
    pub feasible: bool,
}

impl CostReport {
    pub fn term(&self, name: &str) -> Option<u128> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.flops)
    }
}

/// Checked `u128` arithmetic for one variant.
struct Acc(&'static str);

impl Acc {
    fn mul(&self, factors: &[u128]) -> Result<u128, CostError> {
        factors
            .iter()
            .try_fold(1u128, |acc, &f| acc.checked_mul(f))
            .ok_or(CostError::Overflow(self.0))
    }

    fn sum(&self, terms: &[u128]) -> Result<u128, CostError> {
        terms
            .iter()
            .try_fold(0u128, |acc, &t| acc.checked_add(t))
            .ok_or(CostError::Overflow(self.0))
    }
}

struct Builder {
    acc: Acc,
    terms: Vec<CostTerm>,
}

impl Builder {
    fn new(name: &'static str) -> Self {
        Self {
            acc: Acc(name),
            terms: vec![],
        }
    }

    fn term(&mut self, name: &str, flops: u128) -> &mut Self {
        self.terms.push(CostTerm {
            name: name.to_string(),
            flops,
        });
        self
    }

    fn finish(
        self,
        variant: Variant,
        shape: ShapeSpec,
        softmax_entries: u128,
        affinity_elements: u128,
        activation_elements: u128,
        cfg: &CostConfig,
    ) -> Result<CostReport, CostError> {
        let acc = self.acc;
        let flops = acc.sum(&self.terms.iter().map(|t| t.flops).collect::<Vec<_>>())?;
        let embed_flops = acc.sum(
            &self
                .terms
                .iter()
                .filter(|t| t.name.starts_with("embed"))
                .map(|t| t.flops)
                .collect::<Vec<_>>(),
        )?;
        let bytes = cfg.element_bytes as u128;
        let affinity_bytes = acc.mul(&[affinity_elements, bytes])?;
        Ok(CostReport {
            variant,
            shape,
            flops,
            terms: self.terms,
            embed_flops,
            softmax_flops: acc.mul(&[softmax_entries, SOFTMAX_FLOPS_PER_ENTRY])?,
            affinity_elements,
            affinity_bytes,
            activation_elements,
            activation_bytes: acc.mul(&[activation_elements, bytes])?,
            feasible: affinity_bytes <= cfg.byte_budget,
        })
    }
}

/// Embedded-Gaussian self-attention over the `N` pixels.
pub fn cost_sa(s: &ShapeSpec, cfg: &CostConfig) -> Result<CostReport, CostError> {
    let (n, c) = (s.n(), s.c as u128);
    let mut b = Builder::new("sa");
    let embed = b.acc.mul(&[MAC_FLOPS, n, c, c])?;
    let square = b.acc.mul(&[MAC_FLOPS, n, n, c])?;
    b.term("embed_theta", embed)
        .term("embed_phi", embed)
        .term("embed_g", embed)
        .term("affinity_build", square)
        .term("aggregate", square);
    let nn = b.acc.mul(&[n, n])?;
    let act = b.acc.mul(&[4, n, c])?;
    b.finish(Variant::Sa, *s, nn, nn, act, cfg)
}

/// Self-attention over all `N c` elements treated as one-channel pixels.
pub fn cost_naive_spatial_channel(
    s: &ShapeSpec,
    cfg: &CostConfig,
) -> Result<CostReport, CostError> {
    let t = s.total();
    let mut b = Builder::new("naive");
    let embed = b.acc.mul(&[MAC_FLOPS, t])?;
    let square = b.acc.mul(&[MAC_FLOPS, t, t])?;
    b.term("embed_theta", embed)
        .term("embed_phi", embed)
        .term("embed_g", embed)
        .term("affinity_build", square)
        .term("aggregate", square);
    let tt = b.acc.mul(&[t, t])?;
    let act = b.acc.mul(&[4, t])?;
    b.finish(Variant::Naive, *s, tt, tt, act, cfg)
}

/// Dual attention: spatial self-attention plus a `c x c` channel attention,
/// summed elementwise.
pub fn cost_da(s: &ShapeSpec, cfg: &CostConfig) -> Result<CostReport, CostError> {
    let (n, c) = (s.n(), s.c as u128);
    let mut b = Builder::new("da");
    let embed = b.acc.mul(&[MAC_FLOPS, n, c, c])?;
    let square = b.acc.mul(&[MAC_FLOPS, n, n, c])?;
    let channel = b.acc.mul(&[MAC_FLOPS, c, c, n])?;
    b.term("embed_theta", embed)
        .term("embed_phi", embed)
        .term("embed_g", embed)
        .term("affinity_build", square)
        .term("aggregate", square)
        .term("channel_affinity_build", channel)
        .term("channel_aggregate", channel)
        .term("elementwise_sum", n * c);
    let nn = b.acc.mul(&[n, n])?;
    let cc = c * c;
    let entries = b.acc.sum(&[nn, cc])?;
    // theta, phi, g, spatial output, channel output, sum
    let act = b.acc.mul(&[6, n, c])?;
    b.finish(Variant::Da, *s, entries, entries, act, cfg)
}

/// Folded attention: one sub-affinity per axis, four mode mixings.
pub fn cost_fa(s: &ShapeSpec, cfg: &CostConfig) -> Result<CostReport, CostError> {
    let (n, c, t) = (s.n(), s.c as u128, s.total());
    let mut b = Builder::new("fa");
    let embed = b.acc.mul(&[MAC_FLOPS, n, c, c])?;
    b.term("embed_theta", embed)
        .term("embed_phi", embed)
        .term("embed_g", embed);
    let names = ["h", "w", "d", "c"];
    let mut build = Vec::new();
    let mut mix = Vec::new();
    let mut squares = Vec::new();
    for &len in &s.dims() {
        // (len x t/len) by (t/len x len) logits; len x len by len x t/len mixing
        build.push(b.acc.mul(&[MAC_FLOPS, len, t])?);
        mix.push(b.acc.mul(&[MAC_FLOPS, len, t])?);
        squares.push(len * len);
    }
    for (name, f) in names.iter().zip(&build) {
        b.term(&format!("affinity_build_{name}"), *f);
    }
    for (name, f) in names.iter().zip(&mix) {
        b.term(&format!("aggregate_{name}"), *f);
    }
    let entries = b.acc.sum(&squares)?;
    let act = b.acc.mul(&[4, t])?;
    b.finish(Variant::Fa, *s, entries, entries, act, cfg)
}

pub fn cost(variant: Variant, s: &ShapeSpec, cfg: &CostConfig) -> Result<CostReport, CostError> {
    match variant {
        Variant::Sa => cost_sa(s, cfg),
        Variant::Naive => cost_naive_spatial_channel(s, cfg),
        Variant::Da => cost_da(s, cfg),
        Variant::Fa => cost_fa(s, cfg),
    }
}

impl CostReport {
    /// Sum of the `aggregate*` terms.
    pub fn aggregation_flops(&self) -> u128 {
        self.terms
            .iter()
            .filter(|t| t.name.starts_with("aggregate"))
            .map(|t| t.flops)
            .sum()
    }

    /// Sum of the `affinity_build*` terms.
    pub fn affinity_build_flops(&self) -> u128 {
        self.terms
            .iter()
            .filter(|t| t.name.starts_with("affinity_build"))
            .map(|t| t.flops)
            .sum()
    }
}

/// Percentage by which `ours` undercuts `baseline`.
pub fn reduction_percent(ours: u128, baseline: u128) -> f64 {
    100.0 * (1.0 - ours as f64 / baseline as f64)
}
