use thiserror::Error;

/// Every failure the library can report.
///
/// Variants mirror the contract failures of the individual operations, so a
/// caller can tell a bad input (`Dimension`, `NotC1`, ...) from a construction
/// that ran out of budget (`NoConvergence`) or a certificate that could not be
/// decided (`Unresolved`).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unresolved: {0}")]
    Unresolved(String),
    #[error("not Lipschitz: {0}")]
    NotLipschitz(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("pieces are not C1 at knot {knot}: mismatch {mismatch:e}")]
    NotC1 { knot: f64, mismatch: f64 },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("bumps do not cover the box: {0}")]
    Cover(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("gauge exceeded: {0}")]
    Gauge(String),
    #[error("unbounded: {0}")]
    Unbounded(String),
    #[error("smoothed distance not dominated: {0}")]
    NotDominated(String),
    #[error("empty boundary sample")]
    EmptyBoundary,
    #[error("left the retraction tube: {0}")]
    TubeEscape(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
