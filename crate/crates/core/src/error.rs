use thiserror::Error;

use crate::solver::IterationTrace;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("size mismatch: expected {expected}, got {actual}")]
    Size { expected: usize, actual: usize },

    #[error("{0}")]
    TooSmall(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A field in the wrong representation (physical vs frequency) was passed.
    #[error("state error: {0}")]
    State(String),

    #[error("support violation in shell {shell}: relative mass {mass:.3e} outside the admissible region (tolerance {tol:.1e})")]
    Support { shell: String, mass: f64, tol: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("picard iteration diverged after {} iterations", trace.iterations())]
    Divergence { trace: Box<IterationTrace> },

    #[error("time stepper unstable at step {step} (t = {time:.4}): norm grew by {growth:.3e}")]
    Stability { step: usize, time: f64, growth: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("lattice cannot resolve supports: {0}")]
    Resolution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Process exit code under the CLI contract: 2 for usage and validation
    /// problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Divergence { .. } | LabError::Stability { .. } => 3,
            _ => 2,
        }
    }
}
