//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OscimError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("weight convention violated: {0}")]
    ConventionError(String),

    #[error("enumeration budget exceeded: n = {n} > {max}")]
    BudgetExceeded { n: usize, max: usize },

    #[error("coupling symmetry violated: {0}")]
    SymmetryViolation(String),

    #[error("integration diverged at step {step} (t = {t})")]
    IntegrationDiverged {
        step: usize,
        t: f64,
        /// Last fully finite state before the bad step.
        last_state: Vec<f64>,
    },

    #[error("amplitude vector has non-positive mean")]
    ZeroMeanAmplitude,

    #[error("trial of {model} on {instance_id} (seed {seed}) failed: {source}")]
    TrialFailed {
        instance_id: String,
        model: String,
        seed: u64,
        #[source]
        source: Box<OscimError>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, OscimError>;
