use thiserror::Error;

/// Errors produced by statistic evaluation, limit sampling and experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input value {0}")]
    NonFiniteInput(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("unsupported kernel/noise combination: {0}")]
    UnsupportedCombination(String),

    #[error("degenerate noise: variance is zero")]
    DegenerateNoise,

    #[error("drift-constant extrapolation did not converge; sequence {sequence:?}")]
    DivergentExtrapolation { sequence: Vec<f64> },

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("no quantile-table entry for gamma={gamma}, alpha={alpha}")]
    TableMiss { gamma: f64, alpha: f64 },

    #[error("abscissa grids do not match")]
    GridMismatch,

    #[error("change direction undetectable: u(delta) = {0} is not positive")]
    UndetectableDirection(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
