use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inadmissible configuration: {0}")]
    Inadmissible(String),
    #[error("criterion refused: {criterion}")]
    CriterionRefused {
        criterion: String,
        /// Largest admissible interval end found while scanning, if any.
        largest_admissible_alpha: Option<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
