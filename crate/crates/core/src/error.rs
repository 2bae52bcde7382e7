use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "underdetermined system: {rows} stacked rows < {atoms} atoms; use the regularized solver"
    )]
    Underdetermined { rows: usize, atoms: usize },

    #[error("singular normal equations (reciprocal condition estimate {rcond:.3e} < {threshold:.1e})")]
    Singular { rcond: f64, threshold: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
