use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// A microstructure scale that the grid cannot represent.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("Neumann series diverged: non-finite values after term {last_finite}")]
    Divergence { last_finite: usize },

    #[error("degenerate 3-point normalization: |F(1) - F(0)| = {0:e}")]
    DegenerateNormalization(f64),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the user's configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Resolution(_) | Error::Argument(_) | Error::Model(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
