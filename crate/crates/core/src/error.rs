//! Error types shared across the crate.

use thiserror::Error;

/// A payoff evaluation left the domain of the expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("log of non-positive argument {arg}")]
    LogDomain { arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("negative base {base} raised to non-integer exponent {exponent}")]
    PowDomain { base: f64, exponent: f64 },
    #[error("zero base raised to negative exponent {exponent}")]
    PowZeroBase { exponent: f64 },
}

/// Rejected at payoff construction time.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvalidPayoff {
    #[error("need at least one descent and one ascent variable (got m={m}, n={n})")]
    EmptySide { m: usize, n: usize },
    #[error("{which} must be symmetric (max |M - Mᵀ| entry = {max_asym:e})")]
    NonSymmetric { which: &'static str, max_asym: f64 },
    #[error("{name} must be nonnegative (got {value})")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("{which}: expected a {rows}x{cols} matrix")]
    Shape {
        which: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{name} must be finite")]
    NonFiniteParameter { name: &'static str },
}

/// Failures from the certification layer: eigenvalue extraction, inner
/// solvers, and report preconditions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("matrix is not symmetric (max |M - Mᵀ| entry = {max_asym:e})")]
    NotSymmetric { max_asym: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },
    #[error("payoff evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("no usable sample points in the box ({skipped} skipped on domain errors)")]
    NoValidSamples { skipped: usize },
}
