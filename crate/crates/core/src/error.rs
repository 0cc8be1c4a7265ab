use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncation K = {kmax} is too small, need K >= {min}")]
    InvalidTruncation { kmax: usize, min: usize },

    #[error("truncation mismatch: state has K = {state}, expected K = {expected}")]
    TruncationMismatch { state: usize, expected: usize },

    #[error("horizon T = {horizon} must exceed 2*pi")]
    HorizonTooShort { horizon: f64 },

    #[error("mean obstruction: {0}")]
    MeanObstruction(String),

    #[error("mode k = {k} carries data but the control shape does not act on it")]
    UncontrollableMode { k: i64 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid too coarse: {detail}; need at least {needed} intervals")]
    RefinementRequired { needed: usize, detail: String },

    #[error("Gram matrix is ill conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("Gram matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("sigma = {sigma} is within 1e-15 of the rational {p}/{q}")]
    DegenerateSigma { sigma: f64, p: i64, q: i64 },

    #[error("spectral window too small: tail energy fraction {fraction:.3e} exceeds {threshold:.1e}")]
    WindowTooSmall { fraction: f64, threshold: f64 },

    #[error("point outside evaluation domain: {0}")]
    Domain(String),

    #[error("coefficient ledger does not match the family: {0}")]
    IndexCoverage(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidTruncation { .. }
                | Error::TruncationMismatch { .. }
                | Error::HorizonTooShort { .. }
                | Error::MeanObstruction(_)
                | Error::UncontrollableMode { .. }
                | Error::InvalidProfile(_)
                | Error::InvalidInput(_)
                | Error::DegenerateSigma { .. }
                | Error::IndexCoverage(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
