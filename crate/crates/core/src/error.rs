use thiserror::Error;

/// Errors raised by the solvers and certification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LqrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("closed loop is not stable: {0}")]
    Stability(String),

    #[error("numerically singular system: {0}")]
    Singular(String),

    #[error("structural assumption failed: {0}")]
    Assumption(String),

    #[error("iteration did not converge: {0}")]
    Convergence(String),

    #[error("degenerate Lyapunov variable: {0}")]
    Degeneracy(String),

    #[error("point outside the lifted domain: {0}")]
    Domain(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("not applicable: {0}")]
    Inapplicable(String),

    #[error("step size underflow: {0}")]
    Stall(String),

    #[error("insufficient data: {0}")]
    Data(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("invalid input: {0}")]
    Input(String),
}

impl LqrError {
    /// Short machine-readable tag, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            LqrError::Dimension(_) => "dimension",
            LqrError::Contract(_) => "contract",
            LqrError::Stability(_) => "stability",
            LqrError::Singular(_) => "singular",
            LqrError::Assumption(_) => "assumption",
            LqrError::Convergence(_) => "convergence",
            LqrError::Degeneracy(_) => "degeneracy",
            LqrError::Domain(_) => "domain",
            LqrError::Sampling(_) => "sampling",
            LqrError::Inapplicable(_) => "inapplicable",
            LqrError::Stall(_) => "stall",
            LqrError::Data(_) => "data",
            LqrError::UnsupportedDimension(_) => "unsupported_dimension",
            LqrError::Input(_) => "input",
        }
    }
}

pub type Result<T> = std::result::Result<T, LqrError>;
