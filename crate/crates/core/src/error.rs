use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {point} lies outside the basis domain [{min}, {max}]")]
    Domain { point: f64, min: f64, max: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("least-squares fit failed: {0}")]
    Fit(String),

    #[error("direction set is empty: {0}")]
    EmptyDirectionSet(String),

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Format(String),
}

impl From<std::io::Error> for FsimError {
    fn from(e: std::io::Error) -> Self {
        FsimError::Io(e.to_string())
    }
}

impl From<csv::Error> for FsimError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            FsimError::Io(e.to_string())
        } else {
            FsimError::Format(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, FsimError>;
