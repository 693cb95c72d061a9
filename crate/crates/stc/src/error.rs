//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("parameter vector lies outside the declared parameter box")]
    EtaOutOfRange,

    #[error("state diverged at t = {t} s")]
    Divergence { t: f64 },

    #[error("invalid certificate: {0}")]
    Certificate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tuning constraint violated: sup {sup:.6e} exceeds delta budget {delta:.6e}")]
    TuningInfeasible { sup: f64, delta: f64 },

    #[error("undefined statistics: {0}")]
    UndefinedStats(&'static str),

    #[error("unknown model `{0}` (not in the plant registry)")]
    UnknownModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
