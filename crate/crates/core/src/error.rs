//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid saturation bounds: lo={lo} > hi={hi}")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("invalid parameter {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("simulation diverged at t={t:.6} s: |i|={mag:.3} p.u. exceeds 50 p.u.")]
    Diverged { t: f64, mag: f64 },

    #[error("non-finite value fed to {context} at t={t:.6} s")]
    NonFinite { context: &'static str, t: f64 },

    #[error("scenario invalid: {0}")]
    Scenario(String),

    #[error("unknown parameter key `{key}`; valid keys are: {valid}")]
    UnknownKey { key: String, valid: String },

    #[error("parameter `{key}` out of range: {value} ({reason})")]
    OutOfRange {
        key: String,
        value: f64,
        reason: String,
    },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error("trace/scenario mismatch: {0}")]
    TraceMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
