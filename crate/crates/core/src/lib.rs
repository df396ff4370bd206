//! Traveling waves for an SIR epidemic on the two-dimensional integer lattice.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters, equilibria and the basic reproduction number.
//! - [`dispersion`]: the characteristic function of the linearised infected
//!   equation, the critical speed and the decay rates of supercritical fronts.
//! - [`bounds`]: explicit upper/lower envelopes and their residual certificates.
//! - [`profile`]: the truncated wave-profile problem solved by iterating the
//!   integral operator, plus a-priori diagnostics.
//! - [`lyapunov`]: the Volterra-type functional along computed profiles.
//! - [`lattice`]: direct RK4 integration of the lattice system with front
//!   tracking and spreading-speed estimation.

// NaN-aware guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dispersion;
pub mod error;
pub mod lattice;
pub mod lyapunov;
pub mod model;
pub mod profile;
pub mod quadrature;

pub use error::{Error, Result};
pub use model::{Equilibria, ModelParams, ValidationMode};

/// Certificate outcome shared by every diagnostic: a pass flag plus the
/// signed numeric margin (positive means the check held with room to spare).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Certificate {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

impl Certificate {
    pub fn new(name: impl Into<String>, margin: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass: margin >= 0.0 && margin.is_finite(),
            margin,
            detail: detail.into(),
        }
    }
}
