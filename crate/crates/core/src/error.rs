use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A row or header of an input file could not be read.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed input that violates a data invariant (bounds, ordering).
    #[error("validation error: {0}")]
    Validation(String),

    /// A warp or divergence evaluated where `1 + nu * t <= 0`.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no events")]
    NoEvents,

    /// The branch-and-bound loop hit its iteration cap before certifying.
    /// Carries the best incumbent found so far.
    #[error("iteration limit of {iterations} reached (best nu = {nu}, contrast = {contrast})")]
    IterationLimit {
        nu: f64,
        contrast: f64,
        iterations: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
