use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// The scenario or flag values could not be parsed.
    #[error("configuration error: {0}")]
    Config(String),
    /// The scenario parsed but violates one or more invariants.
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Core(#[from] ibvs_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
