use std::path::PathBuf;

/// Crate-wide error type.
///
/// The variants are grouped by how a caller should react: `InvalidInput`
/// signals a caller mistake (bad shapes, bad parameters), the data-oriented
/// variants signal problems with files or their contents, and the numerical
/// variants signal failures of an otherwise well-posed computation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Arguments violate an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A file or byte stream does not match its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// Data values fall outside their documented range.
    #[error("range error: {0}")]
    Range(String),

    /// Two artifacts that must describe the same samples do not line up.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A classification target contains only one class.
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// A numerical routine could not complete (singular system, overflow).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
