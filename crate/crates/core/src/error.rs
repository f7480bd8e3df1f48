use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid scattering channel (n_r = {n_r}, n_l = {n_l}): n_r and n_l must have opposite signs")]
    InvalidChannel { n_r: i32, n_l: i32 },

    #[error("no Bragg resonance: discriminant {discriminant:e} is negative")]
    NoResonance { discriminant: f64 },

    #[error("coupling is only defined between neighbouring modes, got n = {n}, m = {m}")]
    InvalidPair { n: i32, m: i32 },

    #[error("invalid pulse duration: total {total:e} is shorter than both ramps ({ramps:e})")]
    InvalidDuration { total: f64, ramps: f64 },

    #[error("integration quality: norm drift {drift:e} exceeds {limit:e}")]
    IntegrationQuality { drift: f64, limit: f64 },

    #[error("step size {step:e} is not converged: halving changed populations by {change:e}")]
    StepSize { step: f64, change: f64 },

    #[error("fit needs at least one minimum of the mode-0 population inside the series")]
    InsufficientSpan,

    #[error("target mode never populated above {threshold:e}")]
    NoSignal { threshold: f64 },

    #[error("resonance search did not converge: {0}")]
    ResonanceSearch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
