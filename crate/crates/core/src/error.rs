use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("malformed architecture: {0}")]
    Structure(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("matrix is numerically singular{hint}")]
    Singular { hint: &'static str },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("sub-model `{name}`: {source}")]
    SubModel {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("task {task}: {source}")]
    Task {
        task: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True when the error originates from configuration rather than data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::SubModel { source, .. } | Error::Task { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub fn in_submodel(self, name: &str) -> Self {
        Error::SubModel {
            name: name.to_string(),
            source: Box::new(self),
        }
    }

    pub fn in_task(self, task: u32) -> Self {
        Error::Task {
            task,
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
