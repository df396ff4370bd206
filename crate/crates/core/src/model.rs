//! Model parameters and steady states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epidemiological and diffusion constants of the lattice SIR system plus
/// the propagation direction `theta` (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    #[serde(rename = "Lambda")]
    pub recruitment: f64,
    pub beta: f64,
    pub alpha: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Profile, envelope and Lyapunov machinery need `theta` strictly inside the
/// first quadrant; the simulator accepts any direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    Simulation,
    Profile,
}

impl ModelParams {
    /// The reference parameter set: d = 1, Λ = 1, β = 2, α = 1, μ = 1,
    /// γ = 0.5, θ = π/4 (so S₀ = 1 and R₀ = 2).
    pub fn standard() -> Self {
        Self {
            d1: 1.0,
            d2: 1.0,
            d3: 1.0,
            recruitment: 1.0,
            beta: 2.0,
            alpha: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            gamma: 0.5,
            theta: std::f64::consts::FRAC_PI_4,
        }
    }

    pub fn validate(self, mode: ValidationMode) -> Result<Self> {
        let fields = [
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("Lambda", self.recruitment),
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("gamma", self.gamma),
            ("theta", self.theta),
        ];
        for (field, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("non-finite value {v}"),
                });
            }
        }
        let nonneg = [("d1", self.d1), ("d2", self.d2), ("d3", self.d3), ("gamma", self.gamma)];
        for (field, v) in nonneg {
            if v < 0.0 {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be >= 0, got {v}"),
                });
            }
        }
        let positive = [
            ("Lambda", self.recruitment),
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
        ];
        for (field, v) in positive {
            if v <= 0.0 {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        if mode == ValidationMode::Profile {
            let (s, c) = self.theta.sin_cos();
            if s <= 0.0 || c <= 0.0 {
                return Err(Error::InvalidParameter {
                    field: "theta",
                    reason: format!(
                        "profile mode needs sin(theta) > 0 and cos(theta) > 0, got theta = {}",
                        self.theta
                    ),
                });
            }
        }
        Ok(self)
    }

    #[inline]
    pub fn sin_theta(&self) -> f64 {
        self.theta.sin()
    }

    #[inline]
    pub fn cos_theta(&self) -> f64 {
        self.theta.cos()
    }

    /// The four wave-frame shifts ±sinθ, ±cosθ.
    pub fn shifts(&self) -> [f64; 4] {
        let (s, c) = self.theta.sin_cos();
        [s, -s, c, -c]
    }

    /// Saturated incidence βSI/(1+αI).
    #[inline]
    pub fn incidence(&self, s: f64, i: f64) -> f64 {
        self.beta * s * i / (1.0 + self.alpha * i)
    }

    pub fn s0(&self) -> f64 {
        disease_free_equilibrium(self)
    }

    pub fn r0(&self) -> f64 {
        basic_reproduction(self)
    }
}

pub fn validate_params(raw: ModelParams, mode: ValidationMode) -> Result<ModelParams> {
    raw.validate(mode)
}

/// S₀ = Λ/μ₁, the unique I = 0 steady state of the susceptible equation.
pub fn disease_free_equilibrium(p: &ModelParams) -> f64 {
    let s0 = p.recruitment / p.mu1;
    debug_assert!(
        (p.recruitment - p.mu1 * s0).abs() <= 1e-12 * p.recruitment.abs().max(f64::MIN_POSITIVE),
        "disease-free residual"
    );
    s0
}

/// R₀ = βS₀/μ₂.
pub fn basic_reproduction(p: &ModelParams) -> f64 {
    p.beta * disease_free_equilibrium(p) / p.mu2
}

/// Unique positive steady state (S*, I*), certified by back-substitution.
pub fn endemic_equilibrium(p: &ModelParams) -> Result<(f64, f64)> {
    let r0 = basic_reproduction(p);
    if r0 <= 1.0 {
        return Err(Error::NoEndemicEquilibrium { r0 });
    }
    let i_star = (p.recruitment * p.beta - p.mu1 * p.mu2) / (p.mu2 * (p.beta + p.mu1 * p.alpha));
    let s_star = p.mu2 * (1.0 + p.alpha * i_star) / p.beta;
    if !(i_star > 0.0 && s_star > 0.0) {
        return Err(Error::NoEndemicEquilibrium { r0 });
    }
    let [rs, ri] = steady_state_residuals(p, s_star, i_star);
    if rs > 1e-10 || ri > 1e-10 {
        return Err(Error::Certificate(format!(
            "endemic back-substitution residuals ({rs:e}, {ri:e}) exceed 1e-10"
        )));
    }
    Ok((s_star, i_star))
}

/// Relative residuals of Λ − f − μ₁S = 0 and f − μ₂I = 0 at (s, i).
pub fn steady_state_residuals(p: &ModelParams, s: f64, i: f64) -> [f64; 2] {
    let f = p.incidence(s, i);
    let scale_s = p.recruitment.abs().max(f.abs()).max((p.mu1 * s).abs());
    let scale_i = f.abs().max((p.mu2 * i).abs()).max(f64::MIN_POSITIVE);
    [
        (p.recruitment - f - p.mu1 * s).abs() / scale_s,
        (f - p.mu2 * i).abs() / scale_i,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibria {
    pub s0: f64,
    pub r0: f64,
    pub s_star: f64,
    pub i_star: f64,
}

impl Equilibria {
    /// Requires R₀ > 1.
    pub fn new(p: &ModelParams) -> Result<Self> {
        let (s_star, i_star) = endemic_equilibrium(p)?;
        Ok(Self {
            s0: disease_free_equilibrium(p),
            r0: basic_reproduction(p),
            s_star,
            i_star,
        })
    }
}
