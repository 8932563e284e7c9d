//! Crate-wide error type.

/// Errors raised across the simulator, sampler, optimizer and data pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A register was requested past the configured statevector limit.
    #[error("qubit limit exceeded: requested {requested} qubits, limit is {limit}")]
    QubitLimit { requested: usize, limit: usize },

    /// A hidden layer is too wide for exact enumeration; use the shot-based
    /// loss estimate instead.
    #[error(
        "enumeration limit exceeded: layer of width {width} exceeds limit {limit}; \
         use shot-based estimation for this network"
    )]
    EnumerationLimit { width: usize, limit: usize },

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Underlying I/O failure, annotated with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A model or config document failed to parse or validate.
    #[error("invalid document: {0}")]
    Document(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
