use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown root system `{0}`")]
    UnknownGroup(String),
    #[error("invalid root system: {0}")]
    InvalidRootSystem(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid expression: {0}")]
    Expression(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("quadrature resolution {resolution} in rank {rank} exceeds the cell cap")]
    ResolutionOverflow { resolution: usize, rank: usize },
    #[error("could not bracket the balancing radius: {0}")]
    Bracket(String),
    #[error("solver failure at k = {k}: {message}")]
    Solver { k: f64, message: String },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("verification domain error: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnknownGroup(_)
            | Error::InvalidRootSystem(_)
            | Error::Expression(_)
            | Error::Config(_)
            | Error::Json(_) => 2,
            Error::Solver { .. } | Error::Bracket(_) | Error::ResolutionOverflow { .. } => 3,
            Error::Domain(_) | Error::Verification(_) | Error::DegenerateFit(_) => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
