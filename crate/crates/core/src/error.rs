use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("no endemic equilibrium: R0 = {r0} <= 1")]
    NoEndemicEquilibrium { r0: f64 },

    #[error("exponent out of range: |lambda * max(|sin|, |cos|)| = {exponent} exceeds 700")]
    OutOfRange { exponent: f64 },

    #[error("bracket expansion failed: {0}")]
    BracketFailure(String),

    #[error("subcritical speed: c = {c} <= c* = {c_star}")]
    SubcriticalSpeed { c: f64, c_star: f64 },

    #[error("operator output escaped the envelope: {component} at xi = {xi} by {excess:e}")]
    EnvelopeEscape {
        component: &'static str,
        xi: f64,
        excess: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("certificate failed: {0}")]
    Certificate(String),

    #[error("no front: infected density is everywhere on one side of the level")]
    NoFront,

    #[error("insufficient samples: {got} in window, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("numeric abort at t = {t}: {reason}")]
    NumericAbort { t: f64, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
