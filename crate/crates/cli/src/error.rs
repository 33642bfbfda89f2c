use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("refused: {0}")]
    Guard(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("schema: {0}")]
    Schema(String),
}

impl HarnessError {
    pub(crate) fn io(e: impl std::fmt::Display) -> Self {
        HarnessError::Io(e.to_string())
    }

    pub(crate) fn compute(e: impl std::fmt::Display) -> Self {
        HarnessError::Compute(e.to_string())
    }

    /// Process exit code: 1 for failures during a run, 2 for anything
    /// rejected before it starts.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Guard(_) => 2,
            HarnessError::Compute(_) | HarnessError::Io(_) | HarnessError::Schema(_) => 1,
        }
    }
}
