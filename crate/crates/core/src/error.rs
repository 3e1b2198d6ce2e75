use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("operation requires a {expected} basis, got {got}")]
    WrongBasis { expected: &'static str, got: String },

    #[error("truncation too small: need n_s >= {needed}, have {have}")]
    TruncationTooSmall { needed: u32, have: u32 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("steady state not unique or not converged (residual {residual:.3e})")]
    DegenerateKernel { residual: f64 },

    #[error("no deterministic down-conversion point: {0}")]
    NoDownConversionPoint(&'static str),

    #[error("grid too short: {0}")]
    GridTooShort(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;
