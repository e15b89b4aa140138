use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Most variants carry enough context (node index, offending value) to tell
/// a genuine mathematical obstruction apart from a bad input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-integrable potential: {0}")]
    NonIntegrable(String),

    #[error("truncation target unreachable: tail mass {tail:.3e} > tolerance {tol:.3e} at radius {radius}")]
    TruncationUnreachable { tail: f64, tol: f64, radius: f64 },

    #[error("non-finite value {value} at node {node} (x = {x})")]
    NonFinite { node: usize, x: f64, value: f64 },

    #[error("weights underflow to zero across cell {node} (x = {x})")]
    Underflow { node: usize, x: f64 },

    #[error("form not coercive; reduce c or enlarge A (smallest Rayleigh quotient {rayleigh:.6e})")]
    NotCoercive { rayleigh: f64 },

    #[error("theta {theta} >= theta*(h, U) = {critical}")]
    AboveThreshold { theta: f64, critical: f64 },

    #[error("singular system: zero pivot at row {0}")]
    Singular(usize),

    #[error("positivity violated: {0}")]
    NotPositive(String),

    #[error("degenerate set: {0}")]
    DegenerateSet(String),

    #[error("not exponentially integrable: {0}")]
    NotIntegrable(String),

    #[error("inconsistent results: {0}")]
    Inconsistent(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
