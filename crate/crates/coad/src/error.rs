use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("joint vector has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("pose ({x}, {y}, {z}, {psi}) lies outside the task-space bounds")]
    OutOfTaskSpace { x: f64, y: f64, z: f64, psi: f64 },

    #[error("cell index ({0}, {1}, {2}, {3}) is out of range for this grid")]
    InvalidCellIndex(usize, usize, usize, usize),

    #[error("displacement bounds have empty interior: {0}")]
    EmptyInterior(String),

    #[error("start configuration is invalid: {0}")]
    InvalidStart(String),

    #[error("scenario is invalid: {0}")]
    Scenario(String),

    #[error("library format version {got} is not supported (this build reads version {expected})")]
    FormatVersion { expected: u32, got: u32 },

    #[error("scenario fingerprint mismatch: library was built for {library}, runtime scenario is {scenario}")]
    FingerprintMismatch { library: String, scenario: String },

    #[error("library file is malformed: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
