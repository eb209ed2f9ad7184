use thiserror::Error;

/// Failure categories. The CLI maps each variant onto a stable exit code so
/// that scripts can distinguish "the inequality failed" from "the grid was
/// too coarse".
#[derive(Debug, Error)]
pub enum Error {
    /// An acceptance gate or audit inequality failed. Exit code 1.
    #[error("gate failure: {0}")]
    Gate(String),

    /// The requested grid cannot resolve the computation, or the stepper ran
    /// out of step halvings. Exit code 2.
    #[error("resolution/stiffness: {0}")]
    Resolution(String),

    /// Geometric validity breached: graph left the tube radius, the metric
    /// lost positivity, or curvature degenerated below the h_min floor.
    /// Exit code 3.
    #[error("geometry breach: {0}")]
    Geometry(String),

    /// Malformed configuration or serialized data. Exit code 4.
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code used by the `cylflow` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Gate(_) => 1,
            Error::Resolution(_) => 2,
            Error::Geometry(_) => 3,
            Error::Config(_) => 4,
            Error::Io(_) => 4,
        }
    }
}
