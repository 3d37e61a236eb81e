use std::path::PathBuf;

use crate::Mode;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// A precondition on an argument was violated (time outside a path, dimension mismatch, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Total exit rate exceeded the uniformization bound.
    #[error(
        "rate bound violated at t={time}: mode {mode} has total exit rate {total} > lambda {lambda} (rates {rates:?})"
    )]
    RateBound {
        time: f64,
        mode: Mode,
        total: f64,
        lambda: f64,
        rates: Vec<(Mode, f64)>,
    },

    #[error("invalid rate q[{from}->{to}] = {value} at t={time}")]
    InvalidRate {
        time: f64,
        from: Mode,
        to: Mode,
        value: f64,
    },

    #[error("solver blow-up in mode {mode}: state left the finite range after t={last_finite_time}")]
    BlowUp { mode: Mode, last_finite_time: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Domain(_) | SimError::Config(_) | SimError::Resource(_) => 2,
            SimError::RateBound { .. } | SimError::InvalidRate { .. } => 3,
            SimError::BlowUp { .. } => 4,
            SimError::Io { .. } => 5,
        }
    }

    /// Machine-readable error category, printed alongside the message.
    pub fn category(&self) -> &'static str {
        match self {
            SimError::Domain(_) => "domain",
            SimError::Config(_) => "config",
            SimError::Resource(_) => "resource",
            SimError::RateBound { .. } => "rate_bound",
            SimError::InvalidRate { .. } => "invalid_rate",
            SimError::BlowUp { .. } => "blow_up",
            SimError::Io { .. } => "io",
        }
    }
}
