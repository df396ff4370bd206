//! Characteristic function of the infected equation linearised at the
//! disease-free state,
//!
//! Δ_c(λ) = d₂[e^{λ sinθ} + e^{−λ sinθ} + e^{λ cosθ} + e^{−λ cosθ} − 4] − cλ + βS₀ − μ₂,
//!
//! and the quantities derived from it: the critical pair (c*, λ*), the two
//! decay rates λ₁ < λ₂ of a supercritical front, and speed classification.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;

const MAX_EXPONENT: f64 = 700.0;
const MAX_ITER: usize = 400;

/// Δ_c(λ) with the parameter-dependent pieces precomputed.
#[derive(Debug, Clone, Copy)]
pub struct CharacteristicFn {
    d2: f64,
    sin: f64,
    cos: f64,
    /// βS₀ − μ₂ = Δ_c(0).
    growth: f64,
    beta_s0: f64,
}

impl CharacteristicFn {
    pub fn new(p: &ModelParams) -> Self {
        let s0 = p.s0();
        Self {
            d2: p.d2,
            sin: p.sin_theta(),
            cos: p.cos_theta(),
            growth: p.beta * s0 - p.mu2,
            beta_s0: p.beta * s0,
        }
    }

    /// Absolute tolerance used by every certificate: 1e-9 · max(1, βS₀).
    pub fn tolerance(&self) -> f64 {
        1e-9 * self.beta_s0.max(1.0)
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    fn guard(&self, lambda: f64) -> Result<()> {
        let exponent = (lambda * self.sin.abs().max(self.cos.abs())).abs();
        if exponent > MAX_EXPONENT || !exponent.is_finite() {
            return Err(Error::OutOfRange { exponent });
        }
        Ok(())
    }

    // e^{x} + e^{−x} − 2 = 4 sinh²(x/2), which keeps full precision near λ = 0.
    fn spread(&self, lambda: f64) -> f64 {
        let a = (0.5 * lambda * self.sin).sinh();
        let b = (0.5 * lambda * self.cos).sinh();
        4.0 * (a * a + b * b)
    }

    fn spread_prime(&self, lambda: f64) -> f64 {
        2.0 * (self.sin * (lambda * self.sin).sinh() + self.cos * (lambda * self.cos).sinh())
    }

    fn spread_second(&self, lambda: f64) -> f64 {
        2.0 * (self.sin * self.sin * (lambda * self.sin).cosh()
            + self.cos * self.cos * (lambda * self.cos).cosh())
    }

    pub fn value(&self, c: f64, lambda: f64) -> Result<f64> {
        self.guard(lambda)?;
        Ok(self.d2 * self.spread(lambda) - c * lambda + self.growth)
    }

    pub fn slope(&self, c: f64, lambda: f64) -> Result<f64> {
        self.guard(lambda)?;
        Ok(self.d2 * self.spread_prime(lambda) - c)
    }

    pub fn curvature(&self, lambda: f64) -> Result<f64> {
        self.guard(lambda)?;
        Ok(self.d2 * self.spread_second(lambda))
    }

    /// `(λ_min, Δ_c(λ_min))`, the minimum of Δ_c over λ ≥ 0.
    ///
    /// For c ≤ 0 the slope at 0 is nonnegative and the minimum sits at λ = 0.
    pub fn minimum(&self, c: f64) -> Result<(f64, f64)> {
        if c <= 0.0 {
            return Ok((0.0, self.growth));
        }
        if self.d2 <= 0.0 {
            return Err(Error::BracketFailure(
                "d2 = 0: the characteristic function is unbounded below".into(),
            ));
        }
        let mut hi = 1.0;
        while self.slope(c, hi)? < 0.0 {
            hi *= 2.0;
        }
        let lambda = safeguarded_root(
            |l| Ok((self.slope(c, l)?, self.curvature(l)?)),
            0.0,
            hi,
        )?;
        Ok((lambda, self.value(c, lambda)?))
    }
}

/// Root of an increasing-or-decreasing function on a sign-changing bracket:
/// Newton steps when they stay inside the bracket, bisection otherwise.
fn safeguarded_root<F>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (f_lo, _) = f(lo)?;
    let (f_hi, _) = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::BracketFailure(format!(
            "no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"
        )));
    }
    let lo_negative = f_lo < 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (fx, dfx) = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= 4.0 * f64::EPSILON * hi.abs()
        {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

pub fn delta(p: &ModelParams, c: f64, lambda: f64) -> Result<f64> {
    CharacteristicFn::new(p).value(c, lambda)
}

/// ∂Δ_c/∂λ = d₂[sinθ(e^{λ sinθ} − e^{−λ sinθ}) + cosθ(e^{λ cosθ} − e^{−λ cosθ})] − c.
pub fn delta_dlambda(p: &ModelParams, c: f64, lambda: f64) -> Result<f64> {
    CharacteristicFn::new(p).slope(c, lambda)
}

/// The critical speed and the double root of Δ at that speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPair {
    pub c_star: f64,
    pub lambda_star: f64,
    /// Δ_{c*}(λ*); zero up to the certificate tolerance.
    pub min_value: f64,
    /// ∂Δ/∂λ at (λ*, c*).
    pub slope_value: f64,
}

/// Bisection on c for the speed at which min_λ Δ_c(λ) vanishes.
///
/// The minimum is strictly decreasing in c (∂Δ/∂c = −λ), positive at c = 0
/// when R₀ > 1, and tends to −∞ as c grows.
pub fn find_critical(p: &ModelParams) -> Result<CriticalPair> {
    let chi = CharacteristicFn::new(p);
    if chi.growth <= 0.0 {
        return Err(Error::NoEndemicEquilibrium { r0: p.r0() });
    }
    let mut c_lo = 0.0;
    let mut c_hi = 1.0;
    let mut doublings = 0;
    while chi.minimum(c_hi)?.1 >= 0.0 {
        c_lo = c_hi;
        c_hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::BracketFailure(
                "critical speed bracket did not close after 200 doublings".into(),
            ));
        }
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (c_lo + c_hi);
        if mid <= c_lo || mid >= c_hi {
            break;
        }
        if chi.minimum(mid)?.1 >= 0.0 {
            c_lo = mid;
        } else {
            c_hi = mid;
        }
    }
    let (lam_lo, m_lo) = chi.minimum(c_lo)?;
    let (lam_hi, m_hi) = chi.minimum(c_hi)?;
    let (c_star, lambda_star, min_value) = if m_lo.abs() <= m_hi.abs() {
        (c_lo, lam_lo, m_lo)
    } else {
        (c_hi, lam_hi, m_hi)
    };
    let slope_value = chi.slope(c_star, lambda_star)?;
    let tol = chi.tolerance();
    if min_value.abs() >= tol || slope_value.abs() >= tol {
        return Err(Error::Certificate(format!(
            "critical pair residuals |Δ| = {:e}, |∂Δ/∂λ| = {:e} exceed {tol:e}",
            min_value.abs(),
            slope_value.abs()
        )));
    }
    Ok(CriticalPair {
        c_star,
        lambda_star,
        min_value,
        slope_value,
    })
}

/// The two positive roots of Δ_c for c > c*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

pub fn find_roots(p: &ModelParams, c: f64) -> Result<RootPair> {
    let crit = find_critical(p)?;
    find_roots_with(p, c, &crit)
}

/// [`find_roots`] reusing an already computed critical pair.
pub fn find_roots_with(p: &ModelParams, c: f64, crit: &CriticalPair) -> Result<RootPair> {
    let chi = CharacteristicFn::new(p);
    let subcritical = Error::SubcriticalSpeed {
        c,
        c_star: crit.c_star,
    };
    if c <= crit.c_star {
        return Err(subcritical);
    }
    let (lam_min, m) = chi.minimum(c)?;
    if m >= 0.0 {
        return Err(subcritical);
    }
    let eval = |l: f64| Ok((chi.value(c, l)?, chi.slope(c, l)?));
    let lambda1 = safeguarded_root(eval, 0.0, lam_min)?;
    let mut hi = 2.0 * lam_min.max(0.5);
    while chi.value(c, hi)? <= 0.0 {
        hi *= 2.0;
    }
    let lambda2 = safeguarded_root(eval, lam_min, hi)?;
    let tol = chi.tolerance();
    for l in [lambda1, lambda2] {
        let v = chi.value(c, l)?;
        if v.abs() >= tol {
            return Err(Error::Certificate(format!(
                "root residual |Δ_c({l})| = {:e} exceeds {tol:e}",
                v.abs()
            )));
        }
    }
    Ok(RootPair { lambda1, lambda2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedClass {
    Subcritical,
    Critical,
    Supercritical,
}

/// min_λ>0 Δ_c(λ).
pub fn min_delta(p: &ModelParams, c: f64) -> Result<f64> {
    Ok(CharacteristicFn::new(p).minimum(c)?.1)
}

/// Sign of min_λ Δ_c with a 1e-9 (scaled) band for "critical".
pub fn classify_speed(p: &ModelParams, c: f64) -> Result<SpeedClass> {
    let chi = CharacteristicFn::new(p);
    let (_, m) = chi.minimum(c)?;
    Ok(if m.abs() <= chi.tolerance() {
        SpeedClass::Critical
    } else if m > 0.0 {
        SpeedClass::Subcritical
    } else {
        SpeedClass::Supercritical
    })
}
