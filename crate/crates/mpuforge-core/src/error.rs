use thiserror::Error;

/// Errors surfaced by the compiler stack. The CLI maps these onto its
/// stable exit codes (validation = 2, resource = 3, unsupported = 4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("resource cap exceeded: {0}")]
    Resource(String),

    #[error("unsupported MPU: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code contract used by the CLI: 2 validation, 3 resource, 4 unsupported.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shape(_) | Error::Validation(_) | Error::Numerical(_) | Error::Degenerate(_) => {
                2
            }
            Error::Resource(_) => 3,
            Error::Unsupported(_) => 4,
        }
    }
}
