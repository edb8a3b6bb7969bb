use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {0}: every factor needs at least two levels")]
    InvalidDimension(usize),

    #[error("slot {slot} out of range for a space with {factors} factors")]
    SlotOutOfRange { slot: usize, factors: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dressed pair n={n} is degenerate (splitting {splitting:e} rad/s)")]
    Degenerate { n: usize, splitting: f64 },

    #[error("time {t:e} s lies outside the pulse sequence [0, {duration:e}] s")]
    OutOfRange { t: f64, duration: f64 },

    #[error("integration step {step:e} s exceeds the resolution limit {limit:e} s")]
    StepTooLarge { step: f64, limit: f64 },

    #[error("integration diverged at t = {t:e} s")]
    Divergence { t: f64 },

    #[error("trace drifted by {drift:e} during integration")]
    TraceDrift { drift: f64 },

    #[error("basis set is not orthonormal (max deviation {0:e})")]
    NonOrthonormal(f64),
}
