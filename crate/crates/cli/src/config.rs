use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use folded_attention::attention::DEFAULT_SA_BUDGET_BYTES;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Equivalence,
    Gradcheck,
    Cost,
    Bench,
    All,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Equivalence => "equivalence",
            Command::Gradcheck => "gradcheck",
            Command::Cost => "cost",
            Command::Bench => "bench",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// `H,W,D,C`, channel last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape4(pub [usize; 4]);

impl Shape4 {
    pub fn elements(&self) -> u128 {
        self.0.iter().map(|&d| d as u128).product()
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }
}

impl FromStr for Shape4 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected H,W,D,C, got {s:?}"));
        }
        let mut dims = [0usize; 4];
        for (d, p) in dims.iter_mut().zip(&parts) {
            *d = p.parse().map_err(|_| format!("bad size {p:?} in {s:?}"))?;
            if *d == 0 {
                return Err(format!("sizes must be at least 1, got {s:?}"));
            }
        }
        Ok(Shape4(dims))
    }
}

impl fmt::Display for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [h, w, d, c] = self.0;
        write!(f, "{h},{w},{d},{c}")
    }
}

#[derive(Debug, Parser)]
#[command(name = "fa", version, about = "Folded attention verification harness")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Input shape as H,W,D,C (channel last). A channel-first 64x32x32x32
    /// tensor is 32,32,32,64 here.
    #[arg(long, default_value = "2,3,2,3")]
    pub shape: Shape4,
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Apply g before every mode mixing instead of once up front.
    #[arg(long)]
    pub reapply_g: bool,
    /// Relative tolerance for the gradient check.
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute tolerance for the equivalence checks.
    #[arg(long)]
    pub atol: Option<f64>,
    /// Byte budget for the dense self-attention affinity.
    #[arg(long, env = "FA_MEM_BUDGET_BYTES")]
    pub mem_budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub shape: Shape4,
    pub trials: u64,
    pub seed: u64,
    pub rtol: f64,
    pub atol: f64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub reapply_g: bool,
    pub mem_budget_bytes: u64,
}

pub const DEFAULT_ATOL: f64 = 1e-10;
pub const DEFAULT_RTOL: f64 = folded_attention::autodiff::DEFAULT_RTOL;

impl RunConfig {
    pub fn new(command: Command, shape: [usize; 4]) -> Self {
        Self {
            command,
            shape: Shape4(shape),
            trials: 20,
            seed: 42,
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            out: None,
            format: OutputFormat::Json,
            reapply_g: false,
            mem_budget_bytes: DEFAULT_SA_BUDGET_BYTES,
        }
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.shape.0.contains(&0) {
            return Err(HarnessError::Config(
                "shape entries must be at least 1".into(),
            ));
        }
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(HarnessError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl TryFrom<Cli> for RunConfig {
    type Error = HarnessError;

    fn try_from(cli: Cli) -> Result<Self, Self::Error> {
        let cfg = RunConfig {
            command: cli.command,
            shape: cli.shape,
            trials: cli.trials,
            seed: cli.seed,
            rtol: cli.rtol.unwrap_or(DEFAULT_RTOL),
            atol: cli.atol.unwrap_or(DEFAULT_ATOL),
            out: cli.out,
            format: cli.format,
            reapply_g: cli.reapply_g,
            mem_budget_bytes: cli.mem_budget.unwrap_or(DEFAULT_SA_BUDGET_BYTES),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
