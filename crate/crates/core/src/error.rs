use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite: pivot {index} is {pivot:.3e}")]
    SingularMatrix { index: usize, pivot: f64 },

    #[error("degenerate truncation: normalizer {normalizer:.3e} on [{lower}, {upper}]")]
    DegenerateTruncation {
        lower: f64,
        upper: f64,
        normalizer: f64,
    },

    #[error("time-dependent AUC undefined at cutoff {cutoff}: {cases} cases, {controls} controls")]
    UndefinedAuc {
        cutoff: f64,
        cases: usize,
        controls: usize,
    },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("fit failed: {0}")]
    Fit(String),
}
