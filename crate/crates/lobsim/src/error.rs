//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its structural constraint. Reports the first
    /// violated constraint with the field name and the offending value.
    #[error("{field} must {constraint} (got {value})")]
    InvalidParameter {
        field: String,
        value: f64,
        constraint: String,
    },

    /// Grids do not conform (non-divisible steps, mismatched node counts).
    #[error("grid error: {0}")]
    Grid(String),

    /// A time step violates the scheme's stability bound.
    #[error("stability violation: {0}")]
    Stability(String),

    /// Evaluation point outside the admissible domain.
    #[error("{name} = {value} outside {domain}")]
    OutOfDomain {
        name: String,
        value: f64,
        domain: String,
    },

    /// The marginal intensity diverges at z = 0 for concavity exponent r < 1;
    /// callers must treat it as +inf instead of evaluating.
    #[error("unbounded derivative: dz intensity at z = 0 diverges for r < 1")]
    UnboundedDerivative,

    /// First-order-condition map stayed positive up to the sanity cap.
    #[error("no interior root and boundary not optimal (map positive up to z_max = {z_max})")]
    NoRoot { z_max: f64 },

    /// Zero pivot while factoring a tridiagonal system.
    #[error("singular tridiagonal system at row {row}")]
    SingularSystem { row: usize },

    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: &str, value: f64, constraint: &str) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            value,
            constraint: constraint.to_string(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
