use alloc::string::String;
use alloc::vec::Vec;

use crate::Joint;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("total mass is zero")]
    ZeroMass,
    #[error("free-fall sample: vertical support {support:.3e} N is not positive")]
    FreeFall { support: f64 },
    #[error("zero or negative range of motion at the {0}")]
    ZeroRange(Joint),
    #[error("{what} must be strictly positive at the {joint}")]
    NonPositiveMaximum { what: &'static str, joint: Joint },
    #[error("{what} must be strictly positive")]
    NonPositive { what: &'static str },
    #[error("time step must not be negative (got {0})")]
    NegativeTimeStep(f64),
    #[error("neutral posture has not been registered")]
    NeutralNotRegistered,
    #[error("risk thresholds must satisfy 0 < yellow < red < 1 (got {yellow}, {red})")]
    InvalidThresholds { yellow: f64, red: f64 },
    #[error("action window '{0}' contains no samples")]
    EmptyWindow(String),
    #[error("invalid action window: {0}")]
    InvalidWindow(String),
    #[error("regressor is rank deficient; unexcited directions: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("need observations at two or more distinct load levels")]
    InsufficientObservations,
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("differences have zero variance")]
    ZeroVariance,
    #[error("degenerate degrees of freedom")]
    DegenerateDegreesOfFreedom,
    #[error("sample rate {fs} Hz cannot represent a {edge} Hz band edge")]
    SampleRateTooLow { fs: f64, edge: f64 },
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("window of {window} samples is longer than the stream ({len})")]
    WindowTooLong { window: usize, len: usize },
    #[error("maximum-exertion trial carries no external wrench")]
    NoExertion,
    #[error("incomplete table: {0}")]
    IncompleteTable(String),
}
