use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("timescale condition violated: {0}")]
    Timescale(String),

    #[error("step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no feasible control found: {0}")]
    Infeasible(String),

    #[error("at α = {alpha}: {source}")]
    AtAlpha { alpha: f64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for validation
    /// failures, 3 for numerical failures, 64 for usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::InvalidInput(_)
            | Error::Timescale(_)
            | Error::Validation(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::StepUnderflow { .. } | Error::Numerical(_) | Error::Infeasible(_) => 3,
            Error::AtAlpha { source, .. } => source.exit_code(),
            Error::Usage(_) => 64,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
