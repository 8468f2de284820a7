use thiserror::Error;

/// Errors shared across the engine.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("node id {id} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { id: u64, num_nodes: usize },

    #[error("shape mismatch: {context} (got {got_rows}x{got_cols}, expected {want_rows}x{want_cols})")]
    ShapeMismatch {
        context: &'static str,
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },

    #[error("batch norm requires a batch of at least 2 rows in training mode, got {rows}; use a larger batch")]
    BatchTooSmall { rows: usize },

    #[error("non-finite {what} in {context}")]
    NonFinite {
        what: &'static str,
        context: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt file {path}: {message}")]
    CorruptFile { path: String, message: String },
}

impl CoreError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
