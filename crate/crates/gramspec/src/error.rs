//! Error type shared by all solver and I/O entry points.

use num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while validating profiles, solving the
/// vector Dyson equation, or serializing results.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structural mismatch in user-supplied data (sizes, partitions, grids).
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A profile entry is negative, NaN, or infinite.
    #[error("invalid profile entry at ({row}, {col}): {value}")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    /// A spectral parameter was not in the open upper half-plane.
    #[error("spectral point must satisfy Im > 0, got {0}")]
    NotUpperHalfPlane(Complex64),

    /// An operation's mathematical precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative solver exhausted its budget; carries the best residual.
    #[error("no convergence after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A linear operator that must be invertible is (numerically) singular.
    #[error("singular operator: {0}")]
    Singular(String),

    /// An exact identity that certifies solution quality failed, which
    /// signals an inconsistent upstream solution rather than a user error.
    #[error("{name} violated: |lhs - rhs| = {deviation:.3e} exceeds {tolerance:.3e}")]
    IdentityViolation {
        name: &'static str,
        deviation: f64,
        tolerance: f64,
    },

    /// Candidate vector handed to a residual evaluation contains a zero
    /// component (the equation divides by it).
    #[error("candidate vector has a zero component at index {0}")]
    ZeroComponent(usize),

    /// Underlying I/O failure.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file or parameter string.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Convenience constructor for precondition failures.
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Convenience constructor for dimension failures.
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
