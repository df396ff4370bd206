//! The Volterra-type Lyapunov functional along a computed wave profile,
//!
//! L = W + d₁S*(V₁+V₂) + d₂I*(U₁+U₂),  W = cS*g(S/S*) + cI*g(I/I*),
//!
//! where V₁(ξ) = ∫_{ξ−sinθ}^{ξ} g(S/S*) − ∫_{ξ}^{ξ+sinθ} g(S/S*), V₂ uses cosθ,
//! and U₁, U₂ are the same with I/I*.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Equilibria, ModelParams};
use crate::profile::{Component, ProfileGrid};
use crate::quadrature::gauss_legendre_16;

/// g(x) = x − 1 − ln x.
pub fn g(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("g needs a positive argument, got {x}")));
    }
    Ok(x - 1.0 - x.ln())
}

/// The reaction part of dW/dξ along the wave system, simplified with the
/// endemic identities Λ = βS*I*/(1+αI*) + μ₁S* and βS*/(1+αI*) = μ₂.
pub fn frak_a(p: &ModelParams, eq: &Equilibria, s: f64, i: f64) -> f64 {
    frak_a_printed(p, eq, s, i) - p.mu1 * (s - eq.s_star).powi(2) / s
}

/// The same simplification without the −μ₁(S−S*)²/S term.
pub fn frak_a_printed(p: &ModelParams, eq: &Equilibria, s: f64, i: f64) -> f64 {
    let (ss, is) = (eq.s_star, eq.i_star);
    let a = 1.0 + p.alpha * i;
    let a_star = 1.0 + p.alpha * is;
    let f_star = p.beta * ss * is / a_star;
    f_star * (3.0 - ss / s - s * a_star / (ss * a) - a / a_star)
        - p.alpha * p.beta * ss * (i - is).powi(2) / (a * a_star * a_star)
}

/// The unsimplified reaction part (1 − S*/S)(Λ − f − μ₁S) + (1 − I*/I)(f − μ₂I).
pub fn frak_a_direct(p: &ModelParams, eq: &Equilibria, s: f64, i: f64) -> f64 {
    let f = p.incidence(s, i);
    (1.0 - eq.s_star / s) * (p.recruitment - f - p.mu1 * s) + (1.0 - eq.i_star / i) * (f - p.mu2 * i)
}

/// ∫_a^b g(v(u)/scale) du over the piecewise-linear profile, one
/// Gauss–Legendre panel per grid cell.
fn integral_g(grid: &ProfileGrid, which: Component, scale: f64, a: f64, b: f64) -> Result<f64> {
    let h = grid.h;
    let x0 = -grid.half_width;
    let first = ((a - x0) / h).floor() as i64 + 1;
    let mut cuts = vec![a];
    let mut k = first;
    loop {
        let node = x0 + h * k as f64;
        if node >= b - 1e-12 * h {
            break;
        }
        if node > a + 1e-12 * h {
            cuts.push(node);
        }
        k += 1;
    }
    cuts.push(b);
    let mut err = None;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += gauss_legendre_16(w[0], w[1], |u| match g(grid.hat_extend(which, u) / scale) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

fn v_term(grid: &ProfileGrid, which: Component, scale: f64, xi: f64, d: f64) -> Result<f64> {
    let d = d.abs();
    Ok(integral_g(grid, which, scale, xi - d, xi)? - integral_g(grid, which, scale, xi, xi + d)?)
}

fn window_inset(p: &ModelParams, h: f64) -> usize {
    let reach = 1.0 + p.sin_theta().abs().max(p.cos_theta().abs());
    (reach / h - 1e-9).ceil() as usize
}

fn check_inside(p: &ModelParams, grid: &ProfileGrid, xi: f64) -> Result<()> {
    let reach = 1.0 + p.sin_theta().abs().max(p.cos_theta().abs());
    if xi.abs() > grid.half_width - reach + 1e-9 * grid.h {
        return Err(Error::Domain(format!(
            "xi = {xi} closer than {reach} to the grid ends"
        )));
    }
    Ok(())
}

/// L(ξ) on the interpolated profile.
pub fn eval_l(p: &ModelParams, c: f64, eq: &Equilibria, grid: &ProfileGrid, xi: f64) -> Result<f64> {
    check_inside(p, grid, xi)?;
    let (ss, is) = (eq.s_star, eq.i_star);
    let s = grid.hat_extend(Component::S, xi);
    let i = grid.hat_extend(Component::I, xi);
    let w = c * ss * g(s / ss)? + c * is * g(i / is)?;
    let (sn, cs) = (p.sin_theta(), p.cos_theta());
    let v = v_term(grid, Component::S, ss, xi, sn)? + v_term(grid, Component::S, ss, xi, cs)?;
    let u = v_term(grid, Component::I, is, xi, sn)? + v_term(grid, Component::I, is, xi, cs)?;
    Ok(w + p.d1 * ss * v + p.d2 * is * u)
}

/// dL/dξ along the wave system: 𝔄 − d₁S*Σg(S(ξ+δ)/S(ξ)) − d₂I*Σg(I(ξ+δ)/I(ξ)),
/// the sums over δ ∈ {±sinθ, ±cosθ}.
pub fn eval_dl_analytic(p: &ModelParams, eq: &Equilibria, grid: &ProfileGrid, xi: f64) -> Result<f64> {
    check_inside(p, grid, xi)?;
    let s = grid.hat_extend(Component::S, xi);
    let i = grid.hat_extend(Component::I, xi);
    if !(s > 0.0 && i > 0.0) {
        return Err(Error::Domain(format!("profile not positive at xi = {xi}")));
    }
    let (mut gs, mut gi) = (0.0, 0.0);
    for d in p.shifts() {
        gs += g(grid.hat_extend(Component::S, xi + d) / s)?;
        gi += g(grid.hat_extend(Component::I, xi + d) / i)?;
    }
    Ok(frak_a(p, eq, s, i) - p.d1 * eq.s_star * gs - p.d2 * eq.i_star * gi)
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovTrace {
    pub xs: Vec<f64>,
    pub l: Vec<f64>,
    pub dl_analytic: Vec<f64>,
    /// Centered difference of L over neighbouring nodes.
    pub dl_numeric: Vec<f64>,
    /// Centered difference of L over ξ ± h/2.
    pub dl_half_step: Vec<f64>,
    pub max_positive_dl: f64,
    pub min_l: f64,
    pub h: f64,
}

/// L and its derivatives at every node inset by 1 + max(sinθ, cosθ) from
/// the grid ends.
pub fn lyapunov_trace(p: &ModelParams, c: f64, eq: &Equilibria, grid: &ProfileGrid) -> Result<LyapunovTrace> {
    let inset = window_inset(p, grid.h);
    let n = grid.len();
    if n < 2 * inset + 3 {
        return Err(Error::Domain("grid too short for the Lyapunov window".into()));
    }
    let h = grid.h;
    let window: Vec<usize> = (inset + 1..n - inset - 1).collect();
    // L at the window and one node beyond each side
    let l_all = (inset..n - inset)
        .into_par_iter()
        .map(|k| eval_l(p, c, eq, grid, grid.xi(k)))
        .collect::<Result<Vec<f64>>>()?;
    let rows = window
        .par_iter()
        .map(|&k| {
            let x = grid.xi(k);
            let j = k - inset;
            let numeric = (l_all[j + 1] - l_all[j - 1]) / (2.0 * h);
            let half = (eval_l(p, c, eq, grid, x + 0.5 * h)? - eval_l(p, c, eq, grid, x - 0.5 * h)?) / h;
            Ok((x, l_all[j], eval_dl_analytic(p, eq, grid, x)?, numeric, half))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trace = LyapunovTrace {
        xs: Vec::with_capacity(rows.len()),
        l: Vec::with_capacity(rows.len()),
        dl_analytic: Vec::with_capacity(rows.len()),
        dl_numeric: Vec::with_capacity(rows.len()),
        dl_half_step: Vec::with_capacity(rows.len()),
        max_positive_dl: f64::NEG_INFINITY,
        min_l: f64::INFINITY,
        h,
    };
    for (x, l, a, num, half) in rows {
        trace.xs.push(x);
        trace.l.push(l);
        trace.dl_analytic.push(a);
        trace.dl_numeric.push(num);
        trace.dl_half_step.push(half);
        trace.max_positive_dl = trace.max_positive_dl.max(num);
        trace.min_l = trace.min_l.min(l);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub nodes: usize,
    pub compliant: usize,
    pub fraction: f64,
    pub eps: f64,
    pub worst_violation: f64,
    pub worst_xi: Option<f64>,
    pub pass: bool,
}

/// Share of nodes with dL_numeric ≤ eps_rel·max|L|.
pub fn monotonicity_report(trace: &LyapunovTrace, eps_rel: f64) -> MonotonicityReport {
    let max_l = trace.l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = eps_rel * max_l;
    let mut compliant = 0;
    let mut worst = 0.0f64;
    let mut worst_xi = None;
    for (x, &d) in trace.xs.iter().zip(&trace.dl_numeric) {
        if d <= eps {
            compliant += 1;
        } else if d - eps > worst {
            worst = d - eps;
            worst_xi = Some(*x);
        }
    }
    let nodes = trace.xs.len();
    MonotonicityReport {
        nodes,
        compliant,
        fraction: if nodes == 0 { 1.0 } else { compliant as f64 / nodes as f64 },
        eps,
        worst_violation: worst,
        worst_xi,
        pass: compliant == nodes,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub tol: f64,
    pub fraction: f64,
    pub max_abs_diff: f64,
    pub pass: bool,
}

/// Share of nodes where |dL_analytic − dL_numeric| ≤ max(1e-6, 3h²);
/// passes at `min_fraction`.
pub fn derivative_agreement(trace: &LyapunovTrace, min_fraction: f64) -> AgreementReport {
    let tol = 1e-6f64.max(3.0 * trace.h * trace.h);
    let diffs: Vec<f64> = trace
        .dl_analytic
        .iter()
        .zip(&trace.dl_numeric)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let ok = diffs.iter().filter(|&&d| d <= tol).count();
    let fraction = if diffs.is_empty() { 1.0 } else { ok as f64 / diffs.len() as f64 };
    AgreementReport {
        tol,
        fraction,
        max_abs_diff: diffs.iter().copied().fold(0.0, f64::max),
        pass: fraction >= min_fraction,
    }
}
