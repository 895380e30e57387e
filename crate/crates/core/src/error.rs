//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error enum.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A grid could not be constructed (too few points, bad interval, ...).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A sampled function carries a NaN or infinity.
    #[error("non-finite sample at index {index}: {value}")]
    NonFiniteSample { index: usize, value: f64 },

    /// Two sampled functions that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The ODE state left the finite range during integration.
    #[error("ODE state became non-finite at position {position}")]
    IvpBlowUp { position: f64 },

    /// Bracketed root finding was called without a sign change.
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// The spectral parameter fell below the supported minimum.
    #[error("lambda = {lambda} is below the minimum {min}")]
    LambdaBelowMin { lambda: f64, min: f64 },

    /// Eigenvalue shooting could not bracket the target phase.
    #[error("eigenvalue bracket search failed for mode {mode}: {details}")]
    BracketSearchFailed { mode: usize, details: String },

    /// An argument violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The time coefficient dipped below its stated floor.
    #[error("time coefficient {value} below floor {floor} at t = {at}")]
    CoefficientBelowFloor { value: f64, floor: f64, at: f64 },

    /// A fractional operator power was requested on a non-positive spectrum.
    #[error("fractional Sobolev power k = {k} undefined: lambda_{index} = {lambda} <= 0")]
    UndefinedFractionalPower { k: f64, index: usize, lambda: f64 },

    /// A closed-form expression failed to parse.
    #[error("expression error: {0}")]
    Expression(String),
}

pub type Result<T> = std::result::Result<T, Error>;
