use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("structure violated: {what} (defect {defect:.3e})")]
    Structure { what: String, defect: f64 },

    #[error("numerically singular matrix (smallest singular value {sigma_min:.3e})")]
    Singular { sigma_min: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("pencil is singular (determinant vanishes identically); staircase reduction is not supported")]
    SingularPencil,

    #[error("internal inconsistency: {0}")]
    Internal(String),
}
