//! Checks on converged profiles: positivity, a-priori derivative and ratio
//! bounds, and the two-sided Laplace identity.

use serde::Serialize;

use super::{Component, ProfileGrid};
use crate::dispersion::delta;
use crate::error::Result;
use crate::model::ModelParams;

#[derive(Debug, Clone, Serialize)]
pub struct NodeViolation {
    pub index: usize,
    pub xi: f64,
    pub what: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub nodes_checked: usize,
    pub min_s: f64,
    /// min over nodes of S₀ − S.
    pub min_gap_to_s0: f64,
    pub min_i: f64,
    pub violations: Vec<NodeViolation>,
    pub pass: bool,
}

/// 0 < S < S₀ and I > 0 at every node except the left boundary node.
pub fn positivity_check(grid: &ProfileGrid) -> PositivityReport {
    let s0 = grid.env.s0;
    let mut violations = Vec::new();
    let (mut min_s, mut min_gap, mut min_i) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for k in 1..grid.len() {
        let (s, i) = (grid.s[k], grid.i[k]);
        min_s = min_s.min(s);
        min_gap = min_gap.min(s0 - s);
        min_i = min_i.min(i);
        let mut flag = |what: &str| {
            violations.push(NodeViolation {
                index: k,
                xi: grid.xi(k),
                what: what.to_string(),
            })
        };
        if !(s > 0.0) {
            flag("S <= 0");
        }
        if !(s < s0) {
            flag("S >= S0");
        }
        if !(i > 0.0) {
            flag("I <= 0");
        }
    }
    PositivityReport {
        nodes_checked: grid.len().saturating_sub(1),
        min_s,
        min_gap_to_s0: min_gap,
        min_i,
        pass: violations.is_empty(),
        violations,
    }
}

fn centered(v: &[f64], k: usize, h: f64) -> f64 {
    (v[k + 1] - v[k - 1]) / (2.0 * h)
}

/// The explicit bounds N₁ on |S′| and N₂ on |I′|.
pub fn derivative_bounds(p: &ModelParams, c: f64, i0: f64) -> (f64, f64) {
    let s0 = p.s0();
    let n1 = ((8.0 * p.d1 + p.mu1) * s0 + p.recruitment + p.beta * s0 * i0) / c;
    let n2 = (8.0 * p.d2 + p.mu2 + p.beta * s0 * i0) / c;
    (n1, n2)
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeBoundsReport {
    pub n1: f64,
    pub n2: f64,
    pub max_abs_ds: f64,
    pub max_abs_di: f64,
    pub violations: usize,
    /// min(N₁ − max|S′|, N₂ − max|I′|).
    pub margin: f64,
    pub pass: bool,
}

/// |S′| ≤ N₁ and |I′| ≤ N₂ at interior nodes, derivatives by centered
/// differences.
pub fn derivative_bounds_check(p: &ModelParams, c: f64, grid: &ProfileGrid) -> DerivativeBoundsReport {
    let (n1, n2) = derivative_bounds(p, c, grid.env.i0);
    let (mut max_ds, mut max_di) = (0.0f64, 0.0f64);
    let mut violations = 0;
    for k in grid.interior(p) {
        let ds = centered(&grid.s, k, grid.h).abs();
        let di = centered(&grid.i, k, grid.h).abs();
        max_ds = max_ds.max(ds);
        max_di = max_di.max(di);
        if ds > n1 || di > n2 {
            violations += 1;
        }
    }
    let margin = (n1 - max_ds).min(n2 - max_di);
    DerivativeBoundsReport {
        n1,
        n2,
        max_abs_ds: max_ds,
        max_abs_di: max_di,
        violations,
        margin,
        pass: violations == 0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioEntry {
    pub label: String,
    pub max_observed: f64,
    pub bound: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioBoundsReport {
    pub nu: f64,
    pub ratios: Vec<RatioEntry>,
    pub min_log_derivative: f64,
    pub max_log_derivative: f64,
    pub log_derivative_bounds: (f64, f64),
    pub log_derivative_violations: usize,
    /// Largest decrease of ln(e^{νξ}I) between consecutive nodes (≤ 0 when
    /// the weighted profile is nondecreasing).
    pub weighted_max_drop: f64,
    pub weighted_violations: usize,
    pub pass: bool,
}

/// Upper bounds for I(ξ−d)/I(ξ) and I(ξ+d)/I(ξ) at step d > 0.
pub fn ratio_bounds(p: &ModelParams, c: f64, d: f64) -> (f64, f64) {
    let nu = (4.0 * p.d2 + p.mu2) / c;
    let back = (nu * d).exp();
    let forward = 4.0 * (c / p.d2).powi(4) * (3.0 * nu * d).exp() * d.powi(4);
    (back, forward)
}

/// Shifted-ratio bounds, the bracket −ν ≤ I′/I ≤ B, and monotonicity of
/// e^{νξ}I.
pub fn ratio_bounds_check(p: &ModelParams, c: f64, grid: &ProfileGrid) -> RatioBoundsReport {
    let nu = (4.0 * p.d2 + p.mu2) / c;
    let interior = grid.interior(p);
    let mut ratios = Vec::with_capacity(4);
    let mut bound_sum = 0.0;
    for (name, d) in [("sin", p.sin_theta().abs()), ("cos", p.cos_theta().abs())] {
        let (back_bound, fwd_bound) = ratio_bounds(p, c, d);
        bound_sum += back_bound + fwd_bound;
        for (dir, sign, bound, strict) in [("back", -1.0, back_bound, true), ("forward", 1.0, fwd_bound, false)] {
            let mut max_observed = 0.0f64;
            let mut violations = 0;
            for k in interior.clone() {
                let x = grid.xi(k);
                let r = grid.hat_extend(Component::I, x + sign * d) / grid.i[k];
                max_observed = max_observed.max(r);
                let bad = if strict { !(r < bound) } else { !(r <= bound) };
                if bad {
                    violations += 1;
                }
            }
            ratios.push(RatioEntry {
                label: format!("{dir}_{name}"),
                max_observed,
                bound,
                violations,
            });
        }
    }
    let upper = (p.d2 * bound_sum + p.beta * p.s0() - (4.0 * p.d2 + p.mu2)) / c;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut log_violations = 0;
    for k in interior {
        let q = centered(&grid.i, k, grid.h) / grid.i[k];
        lo = lo.min(q);
        hi = hi.max(q);
        if q < -nu || q > upper {
            log_violations += 1;
        }
    }
    let mut max_drop = f64::NEG_INFINITY;
    let mut weighted_violations = 0;
    for k in 0..grid.len() - 1 {
        let step = grid.i[k + 1].ln() - grid.i[k].ln() + nu * grid.h;
        max_drop = max_drop.max(-step);
        if step < -1e-12 {
            weighted_violations += 1;
        }
    }
    let pass = ratios.iter().all(|r| r.violations == 0) && log_violations == 0 && weighted_violations == 0;
    RatioBoundsReport {
        nu,
        ratios,
        min_log_derivative: lo,
        max_log_derivative: hi,
        log_derivative_bounds: (-nu, upper),
        log_derivative_violations: log_violations,
        weighted_max_drop: max_drop,
        weighted_violations,
        pass,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit ln I ≈ intercept + rate·ξ on [−X, −X + min(10, X/4)].
pub fn left_tail_fit(grid: &ProfileGrid) -> TailFit {
    let span = 10f64.min(grid.half_width / 4.0);
    let end = ((span / grid.h).round() as usize).max(2).min(grid.len() - 1);
    let pts: Vec<(f64, f64)> = (0..=end)
        .filter(|&k| grid.i[k] > 0.0)
        .map(|k| (grid.xi(k), grid.i[k].ln()))
        .collect();
    let (slope, intercept, r_squared) = linear_fit(&pts);
    TailFit {
        rate: slope,
        intercept,
        r_squared,
    }
}

/// Ordinary least squares y ≈ a + b x; returns (b, a, r²).
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (b, a, r2)
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceSample {
    pub s: f64,
    pub delta: f64,
    pub transform: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceReport {
    pub tail: TailFit,
    pub samples: Vec<LaplaceSample>,
    pub warnings: Vec<String>,
    pub rel_tol: f64,
    pub pass: bool,
}

fn trapezoid_weighted<F: Fn(usize) -> f64>(grid: &ProfileGrid, s: f64, f: F) -> f64 {
    let n = grid.len();
    let mut acc = 0.0;
    for k in 0..n {
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        acc += w * (-s * grid.xi(k)).exp() * f(k);
    }
    acc * grid.h
}

/// Checks Δ(s,c)·ℒ(s) = ∫e^{−sξ}[βS₀I − βSI/(1+αI)]dξ at each sample s,
/// with ℒ(s) = ∫e^{−sξ}I(ξ)dξ. Both integrals use the trapezoid rule on the
/// grid, an exponential left tail fitted to I near −X, and constant
/// endemic values beyond X.
pub fn laplace_identity_check(
    p: &ModelParams,
    c: f64,
    grid: &ProfileGrid,
    samples: &[f64],
    i_star: f64,
) -> Result<LaplaceReport> {
    const REL_TOL: f64 = 0.02;
    let tail = left_tail_fit(grid);
    let mut warnings = Vec::new();
    if tail.r_squared < 0.99 {
        warnings.push(format!("left tail fit has R^2 = {:.4}", tail.r_squared));
    }
    let x = grid.half_width;
    let bs0 = p.beta * p.s0();
    let mut out = Vec::with_capacity(samples.len());
    for &s in samples {
        if !(s > 0.0) || !(tail.rate > s) {
            warnings.push(format!(
                "sample s = {s} outside (0, fitted tail rate {})",
                tail.rate
            ));
        }
        let left = (tail.intercept - (tail.rate - s) * x).exp() / (tail.rate - s);
        let right_i = i_star * (-s * x).exp() / s;
        let transform = trapezoid_weighted(grid, s, |k| grid.i[k]) + left + right_i;
        let right_rhs = (bs0 - p.mu2) * i_star * (-s * x).exp() / s;
        let rhs = trapezoid_weighted(grid, s, |k| bs0 * grid.i[k] - p.incidence(grid.s[k], grid.i[k]))
            + right_rhs;
        let d = delta(p, c, s)?;
        let lhs = d * transform;
        let rel_error = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
        out.push(LaplaceSample {
            s,
            delta: d,
            transform,
            lhs,
            rhs,
            rel_error,
            pass: rel_error <= REL_TOL,
        });
    }
    Ok(LaplaceReport {
        pass: out.iter().all(|s| s.pass),
        tail,
        samples: out,
        warnings,
        rel_tol: REL_TOL,
    })
}
