use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// An internal algebraic contract failed (e.g. a differential does not square to zero).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A basis was requested from a complex that only computes generator-wise.
    #[error("LOCALLY-EFFECTIVE: {0} has no finite basis in degree {1}")]
    LocallyEffective(String, i32),
    /// A perturbation series did not terminate under the configured cap.
    #[error("diverging perturbation: {0}")]
    Diverging(String),
    /// Malformed textual input (tower documents, generators).
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
