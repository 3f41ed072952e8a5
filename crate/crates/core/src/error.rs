use alloc::string::String;

/// Errors raised by model construction, operator building and the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    /// A spectral parameter or rapidity hit a zero of a denominator.
    #[error("singular argument in {function}: factor {factor} vanishes")]
    Singular {
        function: &'static str,
        factor: &'static str,
    },

    #[error("{what} out of range: {value} (allowed {allowed})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        allowed: String,
    },

    #[error("dimension {dim} exceeds the cap {cap} for {operation}")]
    DimensionCap {
        operation: &'static str,
        dim: usize,
        cap: usize,
    },

    #[error("rapidities are not on-shell: normalized Bethe residual {residual:e}")]
    NotOnShell { residual: f64 },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
