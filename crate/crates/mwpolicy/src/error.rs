use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the domain of a primitive function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A parameter record violates one of its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    /// Bad or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical solver failed. `trace` holds the last iterates.
    #[error("solver failed: {msg}")]
    Solver { msg: String, trace: Vec<String> },
    /// The policy cannot be supported (budget does not close, or some
    /// group would consume a non-positive amount).
    #[error("infeasible policy: {0}")]
    Infeasible(String),
    /// A formula hit a zero denominator.
    #[error("singular: {0}")]
    Singular(String),
    /// Malformed or incomplete input data.
    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver {
            msg: msg.into(),
            trace: Vec::new(),
        }
    }
}
