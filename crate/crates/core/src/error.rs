use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions, missing blocks, bad option values.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a structural assumption (degenerate critical point,
    /// non-symmetric diffusion matrix, reducible chain, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A linear solve or iteration broke down.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Too many trajectories left the padded domain for a statistic to be trusted.
    #[error("{diverged} of {total} trajectories diverged")]
    Diverged { diverged: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure(cond: bool, err: impl FnOnce() -> Error) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(err())
    }
}
