//! Crate-wide error type.

use alloc::vec::Vec;
use core::fmt;

/// Errors reported by the core numerics.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong length for the named field.
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A parameter was outside its admissible range.
    InvalidParameter {
        field: &'static str,
        message: &'static str,
    },
    /// The spatial grid cannot host the fourth-order stencil.
    GridTooSmall { n_interior: usize, minimum: usize },
    /// A semigroup was evaluated at a negative time.
    NegativeTime { t: f64 },
    /// A query time fell outside the sampled trajectory span.
    TimeOutsideSpan { t: f64, start: f64, end: f64 },
    /// Picard iteration did not reach the tolerance; carries the residual
    /// history of the failing window.
    NonConvergence {
        window_start: f64,
        iterations: usize,
        residuals: Vec<f64>,
    },
    /// Initial state violates the boundary compatibility condition required
    /// for strong solutions.
    IncompatibleInitial { residual: f64, tolerance: f64 },
    /// A solver step required the exponential-kernel reduction but the
    /// problem kernel is not exponential.
    KernelNotExponential,
    /// Two trajectories do not share a time grid.
    GridMismatch,
    /// Not enough usable samples for a fit or report.
    InsufficientData { field: &'static str },
    /// The trajectory shows no decay below its initial norm.
    NoDecay,
    /// A dense linear-algebra kernel failed (eigensolve, LU, ...).
    Numerical { message: &'static str },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { field, expected, actual } => {
                write!(f, "dimension mismatch in `{field}`: expected {expected}, got {actual}")
            }
            Error::InvalidParameter { field, message } => {
                write!(f, "invalid parameter `{field}`: {message}")
            }
            Error::GridTooSmall { n_interior, minimum } => {
                write!(f, "grid too small: n_interior = {n_interior}, need at least {minimum}")
            }
            Error::NegativeTime { t } => write!(f, "semigroup time must be nonnegative, got {t}"),
            Error::TimeOutsideSpan { t, start, end } => {
                write!(f, "time {t} outside trajectory span [{start}, {end}]")
            }
            Error::NonConvergence { window_start, iterations, residuals } => {
                write!(
                    f,
                    "Picard iteration did not converge on window starting at t = {window_start} \
                     after {iterations} iterations (last residual {:.3e})",
                    residuals.last().copied().unwrap_or(f64::NAN)
                )
            }
            Error::IncompatibleInitial { residual, tolerance } => {
                write!(
                    f,
                    "initial state violates the boundary compatibility condition: \
                     residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
                )
            }
            Error::KernelNotExponential => {
                write!(f, "time stepping requires an exponential memory kernel")
            }
            Error::GridMismatch => write!(f, "trajectories do not share a time grid"),
            Error::InsufficientData { field } => {
                write!(f, "not enough usable samples for `{field}`")
            }
            Error::NoDecay => write!(f, "trajectory norm never drops below its initial value"),
            Error::Numerical { message } => write!(f, "numerical failure: {message}"),
        }
    }
}

impl core::error::Error for Error {}
