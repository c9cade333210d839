use thiserror::Error;

/// Errors surfaced by solvers, evaluators and generators.
///
/// Structural problems with an instance are *not* errors: [`crate::instance::validate`]
/// reports those as a list of violations instead.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum RmdpError {
    /// Inputs whose shapes do not line up (policy vs. MDP, kernel vs. MDP, ...).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A combinatorial size guard was exceeded.
    #[error("size guard exceeded for {what}: {actual} > {limit}")]
    SizeGuard {
        what: &'static str,
        actual: u128,
        limit: u128,
    },

    /// An argument was outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A precondition on the instance data was violated (e.g. negative costs
    /// where nonnegative ones are required).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numeric procedure failed to reach its contracted accuracy.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, RmdpError>;
