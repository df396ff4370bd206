//! The truncated wave-profile problem on [−X, X].
//!
//! For (φ, ψ) between the envelopes, the operator 𝒫 returns the solution of
//!
//! cS′ + (4d₁+μ₁+κ)S = H₁(φ,ψ),   cI′ + (4d₂+μ₂)I = H₂(φ,ψ),   (S,I)(−X) = (S⁻,I⁻)(−X),
//!
//! with H₁ = d₁Σφ̂(ξ±·) + Λ − βφψ/(1+αψ) + κφ and H₂ = d₂Σψ̂(ξ±·) + βφψ/(1+αψ),
//! the sums running over the four shifts ±sinθ, ±cosθ. Outside [−X, X] the
//! arguments are extended by the lower envelope on the left and by the
//! boundary value on the right. A fixed point of 𝒫 solves the wave system on
//! [−X, X]; it is found by Picard iteration from the lower envelope.

mod diagnostics;

pub use diagnostics::*;

use serde::Serialize;

use crate::bounds::EnvelopeParams;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quadrature::exp_kernel_panel_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Component {
    S,
    I,
}

/// Discretised profile on the uniform grid −X = ξ₀ < … < ξ_{n−1} = X.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileGrid {
    pub half_width: f64,
    pub h: f64,
    pub c: f64,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub env: EnvelopeParams,
}

/// Linear-interpolation stencil for a fixed shift on a uniform grid:
/// ξ_k + d = ξ_{k+offset} + frac·h.
#[derive(Debug, Clone, Copy)]
struct ShiftStencil {
    shift: f64,
    offset: isize,
    frac: f64,
}

impl ShiftStencil {
    fn new(shift: f64, h: f64) -> Self {
        let t = shift / h;
        let offset = t.floor();
        Self {
            shift,
            offset: offset as isize,
            frac: t - offset,
        }
    }
}

fn node_count(half_width: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(half_width > 0.0) {
        return Err(Error::Domain(format!(
            "grid needs X > 0 and h > 0, got X = {half_width}, h = {h}"
        )));
    }
    let ratio = half_width / h;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Domain(format!("X / h = {ratio} is not an integer")));
    }
    Ok(2 * steps as usize + 1)
}

impl ProfileGrid {
    /// The grid holding the lower envelope, the iteration's starting point.
    pub fn from_lower(env: &EnvelopeParams, c: f64, half_width: f64, h: f64) -> Result<Self> {
        Self::from_fn(env, c, half_width, h, |x| (env.lower_s(x), env.lower_i(x)))
    }

    pub fn from_fn<F: Fn(f64) -> (f64, f64)>(
        env: &EnvelopeParams,
        c: f64,
        half_width: f64,
        h: f64,
        f: F,
    ) -> Result<Self> {
        let n = node_count(half_width, h)?;
        let (s, i) = (0..n).map(|k| f(-half_width + h * k as f64)).unzip();
        Ok(Self {
            half_width,
            h,
            c,
            s,
            i,
            env: *env,
        })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    #[inline]
    pub fn xi(&self, k: usize) -> f64 {
        -self.half_width + self.h * k as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.xi(k)).collect()
    }

    pub fn values(&self, which: Component) -> &[f64] {
        match which {
            Component::S => &self.s,
            Component::I => &self.i,
        }
    }

    fn lower_envelope(&self, which: Component, xi: f64) -> f64 {
        match which {
            Component::S => self.env.lower_s(xi),
            Component::I => self.env.lower_i(xi),
        }
    }

    /// φ̂(ξ): the lower envelope left of −X, the boundary value right of X,
    /// and linear interpolation between nodes.
    pub fn hat_extend(&self, which: Component, xi: f64) -> f64 {
        let v = self.values(which);
        let n = v.len();
        if xi > self.half_width {
            return v[n - 1];
        }
        if xi < -self.half_width {
            return self.lower_envelope(which, xi);
        }
        let t = (xi + self.half_width) / self.h;
        let k = (t.floor() as usize).min(n - 1);
        let frac = t - k as f64;
        if k + 1 >= n || frac == 0.0 {
            return v[k];
        }
        v[k] + frac * (v[k + 1] - v[k])
    }

    fn shifted(&self, which: Component, st: &ShiftStencil, k: usize) -> f64 {
        let v = self.values(which);
        let j = k as isize + st.offset;
        if j >= 0 && (j as usize) + 1 < v.len() {
            let j = j as usize;
            v[j] + st.frac * (v[j + 1] - v[j])
        } else {
            self.hat_extend(which, self.xi(k) + st.shift)
        }
    }

    /// (Γ_X membership, worst violation) using the envelope at every node
    /// and the left boundary condition.
    pub fn envelope_gap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            let x = self.xi(k);
            worst = worst
                .max(self.env.lower_s(x) - self.s[k])
                .max(self.s[k] - self.env.upper_s(x))
                .max(self.env.lower_i(x) - self.i[k])
                .max(self.i[k] - self.env.upper_i(x));
        }
        let x0 = -self.half_width;
        worst
            .max((self.s[0] - self.env.lower_s(x0)).abs())
            .max((self.i[0] - self.env.lower_i(x0)).abs())
    }

    pub fn in_gamma(&self, tol: f64) -> bool {
        self.envelope_gap() <= tol
    }

    /// Nodes whose three-point stencil stays at least max(sinθ, cosθ) away
    /// from both ends. The sources of 𝒫 have a derivative jump where a shift
    /// crosses ±X, and a centered difference straddling it is only O(h).
    pub fn interior(&self, p: &ModelParams) -> std::ops::Range<usize> {
        let reach = p.sin_theta().abs().max(p.cos_theta().abs());
        let inset = (reach / self.h - 1e-9).ceil() as usize + 1;
        let n = self.len();
        inset..n.saturating_sub(inset)
    }
}

/// Default monotonisation constant κ = 1.1·βI₀.
pub fn default_kappa(p: &ModelParams, env: &EnvelopeParams) -> f64 {
    1.1 * p.beta * env.i0
}

/// 𝒫 with its grid-dependent pieces (shift stencils, exponential panel
/// weights) precomputed.
#[derive(Debug, Clone)]
pub struct IntegralOperator {
    params: ModelParams,
    c: f64,
    kappa: f64,
    stencils: [ShiftStencil; 4],
    decay_s: f64,
    decay_i: f64,
    weights_s: (f64, f64),
    weights_i: (f64, f64),
    escape_tol: f64,
}

impl IntegralOperator {
    pub fn new(p: &ModelParams, c: f64, env: &EnvelopeParams, h: f64, kappa: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("wave speed must be positive, got {c}")));
        }
        if kappa < p.beta * env.i0 {
            return Err(Error::Domain(format!(
                "kappa = {kappa} below beta*I0 = {}",
                p.beta * env.i0
            )));
        }
        let k_s = (4.0 * p.d1 + p.mu1 + kappa) / c;
        let k_i = (4.0 * p.d2 + p.mu2) / c;
        Ok(Self {
            params: *p,
            c,
            kappa,
            stencils: p.shifts().map(|d| ShiftStencil::new(d, h)),
            decay_s: (-k_s * h).exp(),
            decay_i: (-k_i * h).exp(),
            weights_s: exp_kernel_panel_weights(k_s, h),
            weights_i: exp_kernel_panel_weights(k_i, h),
            escape_tol: 10.0 * h * h,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Nodal values of (H₁, H₂) for the given grid.
    pub fn sources(&self, grid: &ProfileGrid) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        (0..grid.len())
            .map(|k| {
                let (mut sum_s, mut sum_i) = (0.0, 0.0);
                for st in &self.stencils {
                    sum_s += grid.shifted(Component::S, st, k);
                    sum_i += grid.shifted(Component::I, st, k);
                }
                let (phi, psi) = (grid.s[k], grid.i[k]);
                let f = p.incidence(phi, psi);
                (
                    p.d1 * sum_s + p.recruitment - f + self.kappa * phi,
                    p.d2 * sum_i + f,
                )
            })
            .unzip()
    }

    /// 𝒫 before clipping: the quadrature of the variation-of-constants
    /// formula on every node.
    pub fn apply_unclipped(&self, grid: &ProfileGrid) -> (Vec<f64>, Vec<f64>) {
        let (h1, h2) = self.sources(grid);
        let n = grid.len();
        let mut s = vec![0.0; n];
        let mut i = vec![0.0; n];
        let x0 = -grid.half_width;
        s[0] = grid.env.lower_s(x0);
        i[0] = grid.env.lower_i(x0);
        let inv_c = 1.0 / self.c;
        let (ls, rs) = self.weights_s;
        let (li, ri) = self.weights_i;
        for k in 0..n - 1 {
            s[k + 1] = self.decay_s * s[k] + inv_c * (ls * h1[k] + rs * h1[k + 1]);
            i[k + 1] = self.decay_i * i[k] + inv_c * (li * h2[k] + ri * h2[k + 1]);
        }
        (s, i)
    }

    /// One application of 𝒫. Escapes from the envelope larger than 10h²
    /// are errors; smaller ones are clipped.
    pub fn apply(&self, grid: &ProfileGrid) -> Result<ProfileGrid> {
        let (mut s, mut i) = self.apply_unclipped(grid);
        let env = &grid.env;
        for k in 0..grid.len() {
            let x = grid.xi(k);
            let bounds = [
                ("S", &mut s[k], env.lower_s(x), env.upper_s(x)),
                ("I", &mut i[k], env.lower_i(x), env.upper_i(x)),
            ];
            for (component, v, lo, hi) in bounds {
                let excess = (lo - *v).max(*v - hi);
                if excess > self.escape_tol || !v.is_finite() {
                    return Err(Error::EnvelopeEscape {
                        component,
                        xi: x,
                        excess,
                    });
                }
                *v = v.clamp(lo, hi);
            }
        }
        Ok(ProfileGrid {
            s,
            i,
            ..grid.clone()
        })
    }
}

/// One application of 𝒫 to `grid`.
pub fn apply_p(p: &ModelParams, c: f64, grid: &ProfileGrid, kappa: f64) -> Result<ProfileGrid> {
    IntegralOperator::new(p, c, &grid.env, grid.h, kappa)?.apply(grid)
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    pub iterations: usize,
    pub final_delta: f64,
    pub residual: f64,
    pub converged: bool,
    /// Sup-norm update per iteration.
    #[serde(skip)]
    pub updates: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub maxit: usize,
    pub kappa: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            maxit: 10_000,
            kappa: None,
        }
    }
}

fn check_domain(env: &EnvelopeParams, half_width: f64) -> Result<()> {
    let needed = (-env.knot1).max(-env.knot2);
    if half_width <= needed {
        return Err(Error::Domain(format!(
            "X = {half_width} must exceed max(-B1, -B2) = {needed}"
        )));
    }
    Ok(())
}

fn sup_diff(a: &ProfileGrid, b: &ProfileGrid) -> f64 {
    a.s.iter()
        .zip(&b.s)
        .chain(a.i.iter().zip(&b.i))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Picard iteration of 𝒫 from the lower envelope until the sup-norm update
/// drops below `tol` or `maxit` iterations have run.
pub fn solve_fixed_point(
    p: &ModelParams,
    c: f64,
    env: &EnvelopeParams,
    half_width: f64,
    h: f64,
    opts: SolveOptions,
) -> Result<(ProfileGrid, FixedPointReport)> {
    check_domain(env, half_width)?;
    let kappa = opts.kappa.unwrap_or_else(|| default_kappa(p, env));
    let op = IntegralOperator::new(p, c, env, h, kappa)?;
    let mut grid = ProfileGrid::from_lower(env, c, half_width, h)?;
    let mut updates = Vec::new();
    let mut converged = false;
    for _ in 0..opts.maxit {
        let next = op.apply(&grid)?;
        let delta = sup_diff(&next, &grid);
        grid = next;
        updates.push(delta);
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    let report = FixedPointReport {
        iterations: updates.len(),
        final_delta: updates.last().copied().unwrap_or(f64::INFINITY),
        residual: residual(p, &grid),
        converged,
        updates,
    };
    Ok((grid, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainStep {
    pub half_width: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub left_gap_s: f64,
    pub left_i: f64,
    /// Sup difference to the next solution on the smallest window; absent
    /// for the last entry.
    pub window_change: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionReport {
    pub window: f64,
    pub steps: Vec<DomainStep>,
    /// Window changes strictly decrease along the sequence.
    pub cauchy: bool,
    pub all_converged: bool,
}

/// Solves on every X of a strictly increasing sequence and checks that the
/// solutions settle on the smallest window [−X₀, X₀].
pub fn extend_domain(
    p: &ModelParams,
    c: f64,
    env: &EnvelopeParams,
    half_widths: &[f64],
    h: f64,
    opts: SolveOptions,
) -> Result<(ProfileGrid, ExtensionReport)> {
    if half_widths.is_empty() || half_widths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "domain sequence must be nonempty and strictly increasing".into(),
        ));
    }
    let window = half_widths[0];
    let mut solutions = Vec::with_capacity(half_widths.len());
    let mut steps = Vec::with_capacity(half_widths.len());
    for &x in half_widths {
        let (grid, report) = solve_fixed_point(p, c, env, x, h, opts)?;
        steps.push(DomainStep {
            half_width: x,
            iterations: report.iterations,
            converged: report.converged,
            residual: report.residual,
            left_gap_s: (grid.s[0] - env.s0).abs(),
            left_i: grid.i[0],
            window_change: None,
        });
        solutions.push(grid);
    }
    for k in 0..solutions.len().saturating_sub(1) {
        steps[k].window_change = Some(window_difference(&solutions[k], &solutions[k + 1], window));
    }
    let changes: Vec<f64> = steps.iter().filter_map(|s| s.window_change).collect();
    let cauchy = changes.windows(2).all(|w| w[1] < w[0]);
    let all_converged = steps.iter().all(|s| s.converged);
    let largest = solutions.pop().expect("nonempty");
    Ok((
        largest,
        ExtensionReport {
            window,
            steps,
            cauchy,
            all_converged,
        },
    ))
}

/// sup over nodes in [−w, w] of |a − b| for both components. The grids share
/// the spacing, so their nodes coincide on the window.
pub fn window_difference(a: &ProfileGrid, b: &ProfileGrid, w: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let steps = (w / a.h).round() as isize;
    let ca = ((a.len() - 1) / 2) as isize;
    let cb = ((b.len() - 1) / 2) as isize;
    for m in -steps..=steps {
        let (ka, kb) = ((ca + m) as usize, (cb + m) as usize);
        if ka < a.len() && kb < b.len() {
            worst = worst
                .max((a.s[ka] - b.s[kb]).abs())
                .max((a.i[ka] - b.i[kb]).abs());
        }
    }
    worst
}

/// Pointwise traveling-wave residuals at interior nodes (NaN elsewhere):
/// max(|cS′ − d₁𝔍[S] − Λ + f + μ₁S|, |cI′ − d₂𝔍[I] − f + μ₂I|) with
/// centered differences for the derivatives.
pub fn residual_profile(p: &ModelParams, grid: &ProfileGrid) -> Vec<f64> {
    let mut out = vec![f64::NAN; grid.len()];
    let stencils = p.shifts().map(|d| ShiftStencil::new(d, grid.h));
    let c = grid.c;
    for k in grid.interior(p) {
        let (s, i) = (grid.s[k], grid.i[k]);
        let ds = (grid.s[k + 1] - grid.s[k - 1]) / (2.0 * grid.h);
        let di = (grid.i[k + 1] - grid.i[k - 1]) / (2.0 * grid.h);
        let (mut js, mut ji) = (-4.0 * s, -4.0 * i);
        for st in &stencils {
            js += grid.shifted(Component::S, st, k);
            ji += grid.shifted(Component::I, st, k);
        }
        let f = p.incidence(s, i);
        let rs = c * ds - p.d1 * js - p.recruitment + f + p.mu1 * s;
        let ri = c * di - p.d2 * ji - f + p.mu2 * i;
        out[k] = rs.abs().max(ri.abs());
    }
    out
}

/// Maximum traveling-wave residual over the interior nodes.
pub fn residual(p: &ModelParams, grid: &ProfileGrid) -> f64 {
    residual_profile(p, grid)
        .into_iter()
        .filter(|v| !v.is_nan())
        .fold(0.0, f64::max)
}
