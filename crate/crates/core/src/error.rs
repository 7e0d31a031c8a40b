use std::path::PathBuf;

/// Configuration problem, always tagged with the offending key path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
    #[error("{key}: missing required field")]
    Missing { key: String },
    #[error("{key}: {message}")]
    Parse { key: String, message: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.into(), message: message.into() }
    }

    pub fn key(&self) -> &str {
        match self {
            ConfigError::Invalid { key, .. }
            | ConfigError::Missing { key }
            | ConfigError::Parse { key, .. } => key,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: vehicle {vehicle} timestamp {time} does not follow {previous}")]
    NonMonotone { line: usize, vehicle: String, time: f64, previous: f64 },
    #[error("trace is empty")]
    Empty,
    #[error("window starting at {time} s lies outside the trace ({start} s to {end} s)")]
    OutOfRange { time: f64, start: f64, end: f64 },
    #[error("degenerate synthetic geometry: {0}")]
    Degenerate(String),
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
    #[error("fcd xml: {0}")]
    Xml(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("trace: {0}")]
    Trace(#[from] TraceError),
    #[error("vehicle {vehicle}: no sensable subchannel left for selection")]
    NoCandidates { vehicle: String },
    /// Failure of a shared run, reported for each affected sweep point.
    #[error("{0}")]
    Run(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}
