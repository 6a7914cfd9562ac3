use thiserror::Error;

/// Errors raised by the numerical building blocks.
///
/// Failed checks that are part of a report (admissibility, trajectory
/// classification) are recorded in that report instead of being returned here.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("field not representable after stretch: {0}")]
    Truncation(String),
    #[error("iteration did not converge: {0}")]
    Convergence(String),
    #[error("degenerate seed: {0}")]
    DegenerateSeed(String),
    #[error("root not bracketed: {0}")]
    RootNotBracketed(String),
    #[error("shooting bracket does not separate behaviours: {0}")]
    Bracket(String),
    #[error("Nehari projection failed: {0}")]
    Projection(String),
    #[error("no admissible family member: {0}")]
    Family(String),
    #[error("ray has no negative-action point: {0}")]
    Ray(String),
    #[error("ordering error: {0}")]
    Ordering(String),
    #[error("resampling error: {0}")]
    Resampling(String),
    #[error("configuration error: {0}")]
    Configuration(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
