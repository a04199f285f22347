use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation: l_min ({l_min}) must be strictly below l_max ({l_max})")]
    InvalidTruncation { l_min: i64, l_max: i64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parameter `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("generator mismatch: {0}")]
    GeneratorMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("step size underflow at t = {t:e} (h = {h:e}); the generator is too stiff for explicit integration, solve for the steady state instead")]
    StepUnderflow { t: f64, h: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
