use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Coordinates or patterns do not agree on shape.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Bad solver input (non-square or non-finite matrix, empty set, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// The requested distortion is not defined for the given patterns.
    #[error("distortion not applicable: {0}")]
    NotApplicable(String),

    /// A formula was evaluated outside the region where it holds.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric evaluation produced a non-finite or otherwise invalid value.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Exhaustive search refused because the instance is too large.
    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
