use thiserror::Error;

/// Crate-wide error type. The variants map onto the distinct failure classes
/// surfaced by the CLI (argument/validation, resource caps, numeric domain,
/// verification asserts), so every failure path stays distinguishable.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input data failed structural validation (bad Kraus set, malformed
    /// spec file, non-normalized state, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// Numerically out of the operation's domain (e.g. significantly
    /// non-PSD input to a PSD square root).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// A configured dimension cap would be exceeded.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// A derived object could not be assembled within tolerance.
    #[error("construction failed: {0}")]
    Construction(String),

    /// An identity the implementation asserts about its own output failed.
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
