use thiserror::Error;

/// Errors produced by the routing and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("objective returned non-finite value {value} at parameters {params:?}")]
    NonFiniteObjective { value: f64, params: Vec<f64> },

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("{stage}: {inner}")]
    Stage { stage: String, inner: Box<Error> },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            inner: Box::new(self),
        }
    }
}
