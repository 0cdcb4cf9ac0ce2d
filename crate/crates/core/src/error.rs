use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, step sizes or configuration keys.
    #[error("configuration error: {0}")]
    Config(String),

    /// A function was evaluated outside its real domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver instability: {0}")]
    Instability(String),

    /// A numerical branch left its valid region (e.g. a non-positive norm).
    #[error("numerical branch error: {0}")]
    Numerical(String),

    #[error("bound state missing inside the finite-difference stencil: {0}")]
    Stencil(String),

    #[error("infeasible design target {target:.6}: achievable range is [{min:.6}, {max:.6}]")]
    Infeasible { target: f64, min: f64, max: f64 },

    #[error("system size error: {0}")]
    Size(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Size(_) => 2,
            Error::Domain(_)
            | Error::Instability(_)
            | Error::Numerical(_)
            | Error::Stencil(_)
            | Error::Infeasible { .. } => 3,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        }
    }
}
