use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("vectors are not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("ill-conditioned system (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("underdetermined noise estimate (T - gamma = {0:e})")]
    Underdetermined(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Dimension(_) => 2,
            Error::NotHermitian(_)
            | Error::NotOrthonormal(_)
            | Error::IllConditioned(_)
            | Error::Underdetermined(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub(crate) fn dim_err(what: impl Into<String>) -> Error {
    Error::Dimension(what.into())
}

pub(crate) fn arg_err(what: impl Into<String>) -> Error {
    Error::InvalidArgument(what.into())
}
