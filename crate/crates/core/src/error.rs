use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A function argument violated its precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// Configuration could not be parsed or failed validation. `path` is the
    /// dotted field path inside the scenario (or data file) that failed.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A runtime invariant was breached. This is always a simulator bug;
    /// `trace` carries the most recent events for post-mortem.
    #[error("invariant breach at tti {tti}: {message}")]
    Invariant {
        tti: u64,
        message: String,
        trace: Vec<String>,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn invariant(tti: u64, message: impl Into<String>) -> Self {
        Error::Invariant { tti, message: message.into(), trace: Vec::new() }
    }

    /// Attaches a trace dump to an invariant breach; other errors pass through.
    pub fn with_trace(self, trace: Vec<String>) -> Self {
        match self {
            Error::Invariant { tti, message, .. } => Error::Invariant { tti, message, trace },
            e => e,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Input(_))
    }

    pub fn is_invariant(&self) -> bool {
        matches!(self, Error::Invariant { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
