use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("degenerate derivative: {0}")]
    DegenerateDerivative(String),

    #[error("monotonicity error: {0}")]
    Monotonicity(String),

    #[error("singular frame matrix (|det a| = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("assembly error at node {node} (x = {x:e}): {msg}")]
    Assembly { node: usize, x: f64, msg: String },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("eigenvector residual {residual:e} exceeds 1e-6 at lambda = {lambda}")]
    Residual { lambda: f64, residual: f64 },

    #[error("insufficient spectrum: {0}")]
    InsufficientSpectrum(String),

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
