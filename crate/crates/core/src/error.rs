use std::path::PathBuf;

/// Errors raised by the simulator and its solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("vehicle placement failed after {attempts} draws: needed {needed} vehicles")]
    PlacementFailure { attempts: usize, needed: usize },

    #[error("need {needed} vehicles to form the requested pairs, only {available} available")]
    InsufficientVehicles { needed: usize, available: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("CV {cv} offloads a share of its task over a zero-rate link")]
    ZeroRateWithOffload { cv: usize },

    #[error("CV {cv} has zero total delay")]
    DegenerateDelay { cv: usize },

    #[error("coordinate {y} m lies outside the GRIN aperture of half-width {half_width} m")]
    OutOfAperture { y: f64, half_width: f64 },

    #[error("amplitude adjustment factor must be positive, got {0}")]
    NonPositivePsi(f64),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("unknown validation suite `{0}`")]
    UnknownSuite(String),

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
