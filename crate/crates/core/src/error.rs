use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit failed: {reason}")]
    FitFailure { reason: String },

    #[error("rank-deficient Jacobian: parameter(s) {parameters:?} do not influence the model")]
    RankDeficient { parameters: Vec<String> },

    #[error(
        "integrator step size collapsed at t = {t:e} s (h = {step:e} s), last state {state:?}"
    )]
    StepSizeCollapse { t: f64, step: f64, state: Vec<f64> },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Returns `Err(InvalidArgument)` unless `cond` holds.
pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
