use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum PhaseLabError {
    #[error("matrix is not Hermitian: max |M - M^dag| = {max_asymmetry:.3e}")]
    NonHermitian { max_asymmetry: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state invariant violated: {0}")]
    InvalidState(String),

    #[error("drho has weight {leak:.3e} outside the support of rho; no SLD exists")]
    SupportViolation { leak: f64 },

    #[error("RLD quantum Fisher information diverges at p = 0")]
    RldDivergence,

    #[error("profile violates the Dirichlet boundary condition: |f(0)| = {at_zero:.3e}, |f(1)| = {at_one:.3e}; use the windowed A+/A- analysis instead")]
    NotDirichlet { at_zero: f64, at_one: f64 },

    #[error("numerical contract violated: {0}")]
    NumericalContract(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PhaseLabError>;
