use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("grid volume error {error:.3e} exceeds declared tolerance {tolerance:.3e}")]
    GridTolerance { error: f64, tolerance: f64 },
    #[error("unknown identifier `{0}`")]
    Unknown(String),
    #[error("picard horizon {requested} exceeds local existence time {limit} (C = {lipschitz}, R = {radius})")]
    PicardHorizon {
        requested: f64,
        limit: f64,
        lipschitz: f64,
        radius: f64,
    },
    #[error("non-finite state at t = {time} after {steps} steps")]
    NonFinite { time: f64, steps: usize },
    #[error("quantum dimension {dim} exceeds ceiling {ceiling}")]
    DimensionCeiling { dim: usize, ceiling: usize },
    #[error("matrix exponential failed: {0}")]
    Exponential(String),
}

pub type Result<T> = std::result::Result<T, Error>;
