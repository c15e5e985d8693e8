use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {message}")]
    Parameter { name: String, message: String },

    /// Inputs are individually valid but violate an ordering or range contract.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bit scan ran past the safety cap; the random source is corrupt.
    #[error("rng integrity: no set bit within {cap} draws at site ({x}, {y})")]
    RngIntegrity { x: i64, y: i64, cap: u64 },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parameter(name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parameter { name: name.into(), message: message.into() }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}

pub(crate) fn check_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::parameter(name, format!("must lie in (0,1), got {p}")))
    }
}
