use thiserror::Error;

/// Errors raised by the numerical kernels, the full models and the reduced models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RomError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The problem has no meaningful solution (e.g. a vanishing normalization matrix).
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("ill-conditioned interpolation points at step {step}: condition number {cond:.3e}")]
    IllConditioned { step: usize, cond: f64 },

    #[error("degenerate sampling points at step {step}: sampled basis rows are rank deficient")]
    DegenerateSampling { step: usize },

    #[error("reduced model diverged at step {step}")]
    Divergence { step: usize },
}

pub type Result<T> = std::result::Result<T, RomError>;
