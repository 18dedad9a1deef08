use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument outside the mathematical domain: {0}")]
    Domain(String),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("point lies outside the grid support")]
    OutsideSupport,
    #[error("field is not differentiable at the requested point; supply a finite-difference step")]
    NonDifferentiable,
    #[error("sample budget {got} is below the minimum of {min}")]
    BudgetTooSmall { got: u64, min: u64 },
    #[error("shell radius underflow: {0}")]
    ShellUnderflow(String),
    #[error("oracle node budget exceeded: {nodes} nodes (limit {limit})")]
    NodeBudget { nodes: usize, limit: usize },
    #[error("inner domain is not contained in the outer domain")]
    NotNested,
    #[error("field carries no jump set")]
    NoJumpSet,
    #[error("unsupported geometry: {0}")]
    Unsupported(String),
    #[error("rejection sampling failed after {0} attempts")]
    RejectionFailed(usize),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
