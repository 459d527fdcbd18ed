use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Not enough symbols to fill a resource grid, or a stream length mismatch.
    #[error("mapping error: {0}")]
    Mapping(String),

    /// Input vectors or matrices whose sizes do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    /// Linear algebra failed (singular system, eigendecomposition failure).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("plot error: {0}")]
    Plot(String),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}
