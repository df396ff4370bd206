//! Upper and lower envelopes of the wave profile and their certificates.
//!
//! S⁺ = S₀, I⁺ = min(e^{λ₁ξ}, I₀), S⁻ = max(S₀(1 − M₁e^{ε₁ξ}), 0),
//! I⁻ = max(e^{λ₁ξ}(1 − M₂e^{ε₂ξ}), 0).

use serde::Serialize;

use crate::dispersion::{CharacteristicFn, RootPair};
use crate::error::{Error, Result};
use crate::model::ModelParams;

const MAX_HALVINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeParams {
    pub s0: f64,
    pub i0: f64,
    pub m1: f64,
    pub m2: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// 𝔅₁ = ln(1/M₁)/ε₁, where S⁻ reaches zero.
    pub knot1: f64,
    /// 𝔅₂ = ln(1/M₂)/ε₂, where I⁻ reaches zero.
    pub knot2: f64,
    pub lambda1: f64,
}

/// Which envelope function, for kink-aware evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Upper,
    Lower,
}

/// d₁(e^{ε sinθ} + e^{−ε sinθ} + e^{ε cosθ} + e^{−ε cosθ} − 4) − μ₁ − cε, the
/// bracket that has to be negative for S⁻ to be a lower solution.
pub fn susceptible_bracket(p: &ModelParams, c: f64, eps: f64) -> f64 {
    let (s, co) = p.theta.sin_cos();
    let a = (0.5 * eps * s).sinh();
    let b = (0.5 * eps * co).sinh();
    p.d1 * 4.0 * (a * a + b * b) - p.mu1 - c * eps
}

/// Picks ε₁, M₁, ε₂, M₂ and I₀ so that the four envelope inequalities hold.
///
/// ε₁ is halved from λ₁/2 until the susceptible bracket is negative and
/// M₁ = max(2, −β/bracket). ε₂ starts at min(λ₁/2, ε₁) and is halved until
/// Δ_c(λ₁ + ε₂) < 0. M₂ must dominate both the saturation term and the
/// coupling through S₀ − S⁻ ≤ S₀M₁e^{ε₁ξ}, which gives
/// M₂ = max(2, 2βS₀(M₁ + α)/(−Δ_c(λ₁ + ε₂))) once ε₂ ≤ ε₁.
pub fn select_envelope(p: &ModelParams, c: f64, roots: &RootPair) -> Result<EnvelopeParams> {
    let chi = CharacteristicFn::new(p);
    if chi.growth() <= 0.0 {
        return Err(Error::NoEndemicEquilibrium { r0: p.r0() });
    }
    let lambda1 = roots.lambda1;
    if !(lambda1 > 0.0) || !(c > 0.0) {
        return Err(Error::Domain(format!(
            "envelope needs c > 0 and lambda1 > 0, got c = {c}, lambda1 = {lambda1}"
        )));
    }
    let s0 = p.s0();

    let mut eps1 = 0.5 * lambda1;
    let mut bracket = susceptible_bracket(p, c, eps1);
    let mut n = 0;
    while bracket >= 0.0 {
        eps1 *= 0.5;
        bracket = susceptible_bracket(p, c, eps1);
        n += 1;
        if n > MAX_HALVINGS {
            return Err(Error::BracketFailure("no admissible eps1".into()));
        }
    }
    let m1 = (-p.beta / bracket).max(2.0);

    let mut eps2 = (0.5 * lambda1).min(eps1);
    let mut d_shift = chi.value(c, lambda1 + eps2)?;
    let mut n = 0;
    while d_shift >= 0.0 {
        eps2 *= 0.5;
        d_shift = chi.value(c, lambda1 + eps2)?;
        n += 1;
        if n > MAX_HALVINGS {
            return Err(Error::BracketFailure("no admissible eps2".into()));
        }
    }
    let m2 = (2.0 * p.beta * s0 * (m1 + p.alpha) / (-d_shift)).max(2.0);

    let knot1 = (1.0 / m1).ln() / eps1;
    let knot2 = (1.0 / m2).ln() / eps2;

    // sup I⁻ is attained where e^{ε₂ξ} = λ₁/(M₂(λ₁+ε₂)).
    let xi_peak = (lambda1 / (m2 * (lambda1 + eps2))).ln() / eps2;
    let lower_peak = (lambda1 * xi_peak).exp() * eps2 / (lambda1 + eps2);
    let i0 = ((p.beta * s0 - p.mu2) / (p.alpha * p.mu2)).max(lower_peak);

    Ok(EnvelopeParams {
        s0,
        i0,
        m1,
        m2,
        eps1,
        eps2,
        knot1,
        knot2,
        lambda1,
    })
}

impl EnvelopeParams {
    /// ξ where e^{λ₁ξ} meets the plateau I₀.
    pub fn plateau_start(&self) -> f64 {
        self.i0.ln() / self.lambda1
    }

    /// Points where an envelope function is not differentiable.
    pub fn kinks(&self) -> [f64; 3] {
        [self.knot1, self.knot2, self.plateau_start()]
    }

    pub fn upper_s(&self, _xi: f64) -> f64 {
        self.s0
    }

    pub fn upper_i(&self, xi: f64) -> f64 {
        (self.lambda1 * xi).exp().min(self.i0)
    }

    pub fn lower_s(&self, xi: f64) -> f64 {
        (self.s0 * (1.0 - self.m1 * (self.eps1 * xi).exp())).max(0.0)
    }

    pub fn lower_i(&self, xi: f64) -> f64 {
        let e = (self.lambda1 * xi).exp();
        (e * (1.0 - self.m2 * (self.eps2 * xi).exp())).max(0.0)
    }

    pub fn s(&self, bound: Bound, xi: f64) -> f64 {
        match bound {
            Bound::Upper => self.upper_s(xi),
            Bound::Lower => self.lower_s(xi),
        }
    }

    pub fn i(&self, bound: Bound, xi: f64) -> f64 {
        match bound {
            Bound::Upper => self.upper_i(xi),
            Bound::Lower => self.lower_i(xi),
        }
    }

    // Derivatives are the closed-form branch derivatives; at a kink they
    // return the right-sided value.

    pub fn upper_i_prime(&self, xi: f64) -> f64 {
        if xi < self.plateau_start() {
            self.lambda1 * (self.lambda1 * xi).exp()
        } else {
            0.0
        }
    }

    pub fn lower_s_prime(&self, xi: f64) -> f64 {
        if xi < self.knot1 {
            -self.s0 * self.m1 * self.eps1 * (self.eps1 * xi).exp()
        } else {
            0.0
        }
    }

    pub fn lower_i_prime(&self, xi: f64) -> f64 {
        if xi < self.knot2 {
            let l = self.lambda1;
            let k = l + self.eps2;
            l * (l * xi).exp() - self.m2 * k * (k * xi).exp()
        } else {
            0.0
        }
    }
}

/// 𝔍[φ](ξ) = φ(ξ+sinθ) + φ(ξ−sinθ) + φ(ξ+cosθ) + φ(ξ−cosθ) − 4φ(ξ).
pub fn shift_laplacian<F: Fn(f64) -> f64>(p: &ModelParams, f: F, xi: f64) -> f64 {
    p.shifts().iter().map(|&d| f(xi + d)).sum::<f64>() - 4.0 * f(xi)
}

/// The four envelope inequalities, in the order S⁺, I⁺, S⁻, I⁻.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Inequality {
    UpperS,
    UpperI,
    LowerS,
    LowerI,
}

impl Inequality {
    pub const ALL: [Inequality; 4] = [
        Inequality::UpperS,
        Inequality::UpperI,
        Inequality::LowerS,
        Inequality::LowerI,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Inequality::UpperS => "a_upper_S",
            Inequality::UpperI => "b_upper_I",
            Inequality::LowerS => "c_lower_S",
            Inequality::LowerI => "d_lower_I",
        }
    }
}

/// Signed residuals at one ξ, oriented so that a valid envelope gives a
/// nonnegative value for every entry, plus the magnitude of the terms that
/// went into each (for rounding-aware comparison).
#[derive(Debug, Clone, Copy)]
pub struct ResidualSample {
    pub xi: f64,
    pub oriented: [f64; 4],
    pub magnitude: [f64; 4],
}

/// Raw residuals (before orientation):
/// (a) cS⁺′ − d₁𝔍[S⁺] − Λ + βS⁺I⁻/(1+αI⁻) + μ₁S⁺          (≥ 0),
/// (b) cI⁺′ − d₂𝔍[I⁺] − βS⁺I⁺/(1+αI⁺) + μ₂I⁺               (≥ 0),
/// (c) cS⁻′ − d₁𝔍[S⁻] − Λ + βS⁻I⁺/(1+αI⁺) + μ₁S⁻          (≤ 0),
/// (d) cI⁻′ − d₂𝔍[I⁻] − βS⁻I⁻/(1+αI⁻) + μ₂I⁻               (≤ 0).
pub fn envelope_residuals(p: &ModelParams, c: f64, env: &EnvelopeParams, xi: f64) -> ResidualSample {
    let lam = p.recruitment;
    let (s_up, s_lo) = (env.upper_s(xi), env.lower_s(xi));
    let (i_up, i_lo) = (env.upper_i(xi), env.lower_i(xi));

    let j_s_up = shift_laplacian(p, |x| env.upper_s(x), xi);
    let j_i_up = shift_laplacian(p, |x| env.upper_i(x), xi);
    let j_s_lo = shift_laplacian(p, |x| env.lower_s(x), xi);
    let j_i_lo = shift_laplacian(p, |x| env.lower_i(x), xi);

    let neigh_sum = |f: &dyn Fn(f64) -> f64| -> f64 {
        p.shifts().iter().map(|&d| f(xi + d).abs()).sum::<f64>() + 4.0 * f(xi).abs()
    };

    let f_a = p.incidence(s_up, i_lo);
    let a = -p.d1 * j_s_up - lam + f_a + p.mu1 * s_up;
    let a_mag = p.d1 * neigh_sum(&|x| env.upper_s(x)) + lam + f_a + p.mu1 * s_up;

    let f_b = p.incidence(s_up, i_up);
    let dip = env.upper_i_prime(xi);
    let b = c * dip - p.d2 * j_i_up - f_b + p.mu2 * i_up;
    let b_mag = (c * dip).abs() + p.d2 * neigh_sum(&|x| env.upper_i(x)) + f_b + p.mu2 * i_up;

    let f_c = p.incidence(s_lo, i_up);
    let dsl = env.lower_s_prime(xi);
    let cc = c * dsl - p.d1 * j_s_lo - lam + f_c + p.mu1 * s_lo;
    let c_mag = (c * dsl).abs() + p.d1 * neigh_sum(&|x| env.lower_s(x)) + lam + f_c + p.mu1 * s_lo;

    let f_d = p.incidence(s_lo, i_lo);
    let dil = env.lower_i_prime(xi);
    let d = c * dil - p.d2 * j_i_lo - f_d + p.mu2 * i_lo;
    let d_mag = (c * dil).abs() + p.d2 * neigh_sum(&|x| env.lower_i(x)) + f_d + p.mu2 * i_lo;

    ResidualSample {
        xi,
        oriented: [a, b, -cc, -d],
        magnitude: [a_mag, b_mag, c_mag, d_mag],
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalitySummary {
    pub inequality: Inequality,
    pub label: &'static str,
    /// Smallest oriented residual (≥ 0 when the inequality holds).
    pub min_oriented: f64,
    pub max_oriented: f64,
    /// Smallest oriented residual plus its rounding allowance; negative
    /// exactly when some point is a violation.
    pub min_slack: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub inequality: Inequality,
    pub xi: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub points_checked: usize,
    pub points_guarded: usize,
    pub summaries: Vec<InequalitySummary>,
    pub violations: Vec<Violation>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative rounding allowance: a residual counts as violated only when it
/// is below −REL_TOL times the magnitude of its own terms.
pub const REL_TOL: f64 = 1e-10;

/// Evaluates the four envelope inequalities on `grid`, skipping points within
/// `guard` of a kink (the knots and the plateau start).
pub fn verify_upper_lower(
    p: &ModelParams,
    c: f64,
    env: &EnvelopeParams,
    grid: &[f64],
    guard: f64,
) -> CertificateReport {
    let kinks = env.kinks();
    let mut summaries: Vec<InequalitySummary> = Inequality::ALL
        .iter()
        .map(|&inequality| InequalitySummary {
            inequality,
            label: inequality.label(),
            min_oriented: f64::INFINITY,
            max_oriented: f64::NEG_INFINITY,
            min_slack: f64::INFINITY,
            violations: 0,
        })
        .collect();
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut guarded = 0;
    for &xi in grid {
        if kinks.iter().any(|k| (xi - k).abs() <= guard) {
            guarded += 1;
            continue;
        }
        checked += 1;
        let r = envelope_residuals(p, c, env, xi);
        for (k, s) in summaries.iter_mut().enumerate() {
            let v = r.oriented[k];
            s.min_oriented = s.min_oriented.min(v);
            s.max_oriented = s.max_oriented.max(v);
            let slack = v + REL_TOL * r.magnitude[k];
            s.min_slack = s.min_slack.min(slack);
            if !(slack >= 0.0) {
                s.violations += 1;
                violations.push(Violation {
                    inequality: s.inequality,
                    xi,
                    residual: v,
                });
            }
        }
    }
    CertificateReport {
        points_checked: checked,
        points_guarded: guarded,
        summaries,
        violations,
    }
}

/// `n` equally spaced points on [lo, hi] and their spacing.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let step = (hi - lo) / (n - 1) as f64;
    ((0..n).map(|k| lo + step * k as f64).collect(), step)
}


#[cfg(test)]
mod amplitude_tests {
    use super::*;
    use crate::dispersion::{find_critical, find_roots_with};

    /// M₂ = max(2, 2/(−Δ_c(λ₁+ε₂))) only accounts for the saturation term and
    /// misses the coupling through S₀ − S⁻; inequality (d) then fails.
    #[test]
    fn saturation_only_amplitude_is_insufficient() {
        let p = ModelParams::standard();
        let crit = find_critical(&p).unwrap();
        let c = 1.5 * crit.c_star;
        let roots = find_roots_with(&p, c, &crit).unwrap();
        let mut env = select_envelope(&p, c, &roots).unwrap();
        let chi = CharacteristicFn::new(&p);
        env.m2 = (2.0 / -chi.value(c, env.lambda1 + env.eps2).unwrap()).max(2.0);
        env.knot2 = (1.0 / env.m2).ln() / env.eps2;
        let (grid, step) = uniform_grid(-200.0, 200.0, 100_001);
        let report = verify_upper_lower(&p, c, &env, &grid, step);
        assert!(report
            .violations
            .iter()
            .any(|v| v.inequality == Inequality::LowerI));
    }
}
