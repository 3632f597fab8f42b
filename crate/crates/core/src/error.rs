use thiserror::Error;

/// Library-wide error type.
///
/// `Domain` marks arguments outside an operation's mathematical domain,
/// `Precision` marks results that cannot be trusted in double precision
/// (catastrophic cancellation, recurrence overflow, failed cross-checks),
/// and `Accuracy` carries the best available estimate when adaptive
/// quadrature stops short of the requested tolerance.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("quadrature accuracy: {message} (best estimate {estimate:e}, error bound {error:e})")]
    Accuracy {
        estimate: f64,
        error: f64,
        message: String,
    },

    #[error("fit failure: {0}")]
    FitFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
