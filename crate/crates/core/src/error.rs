use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),

    #[error("a configuration needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("degenerate configuration: points {0} and {1} coincide")]
    Degenerate(usize, usize),

    #[error("energy overflows at p = {0}; use log_domain_energy instead")]
    Overflow(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration is not near-critical (scaled gradient sup-norm {sup_norm:e} > {limit:e})")]
    NotNearCritical { sup_norm: f64, limit: f64 },

    #[error("size mismatch: {0} vs {1} points")]
    SizeMismatch(usize, usize),

    #[error("no sign change of the energy difference on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("point {index} at x = {x} is not within {tol} of any column")]
    ColumnBinning { index: usize, x: f64, tol: f64 },

    #[error("mask recovery failed: {0}")]
    MaskRecovery(String),

    #[error("malformed configuration file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
