use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters or unknown names in user-facing input.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input is well formed but outside the physical model's domain.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Field evaluation too close to the point dipole.
    #[error("singular evaluation: {0}")]
    Singular(String),
    /// An assumption of the weak-coupling detector model broke down.
    #[error("model violation: {0}")]
    ModelViolation(String),
    #[error("estimation degeneracy: Fisher matrix condition number {condition:.3e}")]
    Degenerate { condition: f64 },
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("resource limit: {0}")]
    Resource(String),
}
