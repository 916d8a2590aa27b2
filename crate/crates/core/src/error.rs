use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension N = {0}: need N >= 2")]
    InvalidDimension(u32),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("boundary level {level} outside (0, {amplitude}): no steady state exists")]
    LevelOutOfRange { level: f64, amplitude: f64 },

    #[error("blow-up time bound undefined for m = {mass} <= m_c = {critical}")]
    UndefinedBound { mass: f64, critical: f64 },

    #[error("negative density sample {value} at radius {radius}")]
    NegativeDensity { radius: f64, value: f64 },

    #[error("steady level {steady} does not match boundary value {boundary}")]
    InconsistentLevel { steady: f64, boundary: f64 },

    #[error("functional requires critical mass: m = {mass}, m_c = {critical}")]
    WrongRegime { mass: f64, critical: f64 },

    #[error(
        "Newton iteration did not converge: residual {residual:e} after {iterations} iterations"
    )]
    NewtonFailure { residual: f64, iterations: usize },

    #[error("time step underflow at t = {t}: dt fell below dt_min without a blow-up signature")]
    Stalled { t: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("mass bracket [{lo}, {hi}] does not straddle the threshold: both ends classify as {outcome}")]
    Bracket { lo: f64, hi: f64, outcome: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
