use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("singular braiding: {0}")]
    SingularBraiding(String),
    #[error("degenerate state: pairing matrix is singular")]
    DegenerateState,
    #[error("no state divergence: residual {0:.3e}")]
    NoStateDivergence(f64),
    #[error("exact forms do not span the one-forms (residual {0:.3e})")]
    Spanning(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical abort at t = {t}: {reason}")]
    Numerical { t: f64, reason: String },
    #[error("point rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
