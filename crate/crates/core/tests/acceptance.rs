//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};
use std::time::{Duration, Instant};

use lattice_wave::bounds::{select_envelope, uniform_grid, verify_upper_lower, EnvelopeParams};
use lattice_wave::dispersion::{delta, delta_dlambda, find_critical, find_roots_with, CharacteristicFn};
use lattice_wave::lattice::{nonexistence_probe, run, Integrator, Boundary, LatticeState, SimConfig};
use lattice_wave::lyapunov::{derivative_agreement, lyapunov_trace, monotonicity_report};
use lattice_wave::profile::{derivative_bounds_check, laplace_identity_check, linear_fit, ratio_bounds_check};
use lattice_wave::profile::{solve_fixed_point, ProfileGrid, SolveOptions};
use lattice_wave::{Equilibria, ModelParams, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// Standard set at c = 1.5c*.
struct Setup {
    p: ModelParams,
    c: f64,
    env: EnvelopeParams,
    eq: Equilibria,
}

fn setup() -> Result<Setup> {
    let p = ModelParams::standard();
    let crit = find_critical(&p)?;
    let c = 1.5 * crit.c_star;
    let roots = find_roots_with(&p, c, &crit)?;
    let env = select_envelope(&p, c, &roots)?;
    let eq = Equilibria::new(&p)?;
    Ok(Setup { p, c, env, eq })
}

fn dispersion_certificates() -> Result<Outcome> {
    let p = ModelParams::standard();
    let chi = CharacteristicFn::new(&p);
    let tol = chi.tolerance();
    let crit = find_critical(&p)?;
    let c = 1.5 * crit.c_star;
    let roots = find_roots_with(&p, c, &crit)?;
    let (l1, l2) = (roots.lambda1, roots.lambda2);
    let residuals = [
        crit.min_value.abs(),
        crit.slope_value.abs(),
        delta(&p, c, l1)?.abs(),
        delta(&p, c, l2)?.abs(),
    ];
    let mut sign_errors = 0;
    let top = 2.0 * l2;
    for k in 1..=1000 {
        let l = top * k as f64 / 1000.0;
        let v = delta(&p, c, l)?;
        // points within 1e-9 of a root carry no sign information
        if (l - l1).abs() < 1e-9 || (l - l2).abs() < 1e-9 {
            continue;
        }
        let expected_positive = l < l1 || l > l2;
        if (v > 0.0) != expected_positive {
            sign_errors += 1;
        }
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    outcome(
        worst < tol && l1 < crit.lambda_star && crit.lambda_star < l2 && sign_errors == 0,
        format!(
            "c*={:.8} λ*={:.6} λ1={l1:.6} λ2={l2:.6} max residual {worst:.1e} (tol {tol:.0e}) sign errors {sign_errors}/1000",
            crit.c_star, crit.lambda_star
        ),
    )
}

fn derivative_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..10_000 {
        let c = rng.gen_range(0.1..10.0);
        let l = rng.gen_range(0.01..5.0);
        let theta = rng.gen_range(0.0..FRAC_PI_2);
        let p = ModelParams { theta, ..ModelParams::standard() };
        let h = 1e-5;
        let fd = (delta(&p, c, l + h)? - delta(&p, c, l - h)?) / (2.0 * h);
        let an = delta_dlambda(&p, c, l)?;
        let rel = (fd - an).abs() / an.abs().max(1.0);
        worst = worst.max(rel);
        if rel > 1e-6 {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("max relative deviation {worst:.2e} over 10^4 points, {failures} above 1e-6"),
    )
}

fn envelope_certificate(s: &Setup) -> Result<Outcome> {
    let (grid, step) = uniform_grid(-200.0, 200.0, 100_000);
    let report = verify_upper_lower(&s.p, s.c, &s.env, &grid, step);
    outcome(
        report.passed(),
        format!(
            "{} points checked, {} guarded, {} violations",
            report.points_checked,
            report.points_guarded,
            report.violations.len()
        ),
    )
}

fn fixed_point_existence(s: &Setup) -> Result<Outcome> {
    let opts = SolveOptions::default();
    let mut residuals = Vec::new();
    let mut notes = Vec::new();
    let mut ok = true;
    for h in [0.1, 0.05, 0.025] {
        let (grid, rep) = solve_fixed_point(&s.p, s.c, &s.env, 40.0, h, opts)?;
        let inside = grid.in_gamma(1e-12);
        ok &= rep.converged && rep.iterations <= 10_000 && inside && rep.residual <= 5e-3;
        notes.push(format!("h={h}: {} its, residual {:.2e}, in Γ {inside}", rep.iterations, rep.residual));
        residuals.push((h, rep.residual));
    }
    let pts: Vec<(f64, f64)> = residuals.iter().map(|(h, r)| (h.ln(), r.ln())).collect();
    let (slope, _, _) = linear_fit(&pts);
    let ratios = [residuals[0].1 / residuals[1].1, residuals[1].1 / residuals[2].1];
    ok &= (slope - 2.0).abs() <= 0.3;
    outcome(
        ok,
        format!(
            "{}; halving ratios {:.2}, {:.2}; log-log slope {slope:.3}",
            notes.join("; "),
            ratios[0],
            ratios[1]
        ),
    )
}

fn boundary_behaviour(s: &Setup, grid: &ProfileGrid) -> Outcome {
    let n = grid.len() - 1;
    let left_s = (grid.s[0] - s.p.s0()).abs();
    let left_i = grid.i[0];
    let right = ((grid.s[n] - s.eq.s_star) / s.eq.s_star)
        .abs()
        .max(((grid.i[n] - s.eq.i_star) / s.eq.i_star).abs());
    Outcome {
        pass: left_s < 1e-3 && left_i < 1e-3 && right < 0.05,
        detail: format!(
            "|S(-X)-S0|={left_s:.2e} I(-X)={left_i:.2e} right relative gap {right:.2e} (S,I)(X)=({:.8}, {:.8})",
            grid.s[n], grid.i[n]
        ),
    }
}

fn a_priori_bounds(s: &Setup, grid: &ProfileGrid) -> Outcome {
    let d = derivative_bounds_check(&s.p, s.c, grid);
    let r = ratio_bounds_check(&s.p, s.c, grid);
    let ratios: Vec<String> = r
        .ratios
        .iter()
        .map(|e| format!("{} {:.3}/{:.3}", e.label, e.max_observed, e.bound))
        .collect();
    Outcome {
        pass: d.pass && r.pass,
        detail: format!(
            "N1={:.3} max|S'|={:.4} N2={:.3} max|I'|={:.4} violations {}; ratios [{}] ν={:.3}",
            d.n1,
            d.max_abs_ds,
            d.n2,
            d.max_abs_di,
            d.violations,
            ratios.join(", "),
            r.nu
        ),
    }
}

fn lyapunov_monotonicity(s: &Setup, grid: &ProfileGrid) -> Result<Outcome> {
    let trace = lyapunov_trace(&s.p, s.c, &s.eq, grid)?;
    let mono = monotonicity_report(&trace, 1e-7);
    let agree = derivative_agreement(&trace, 0.99);
    outcome(
        mono.pass && agree.pass,
        format!(
            "{}/{} nodes with dL <= {:.1e}; analytic agreement {:.2}% within {:.1e} (max diff {:.2e})",
            mono.compliant,
            mono.nodes,
            mono.eps,
            100.0 * agree.fraction,
            agree.tol,
            agree.max_abs_diff
        ),
    )
}

fn laplace_identity(s: &Setup, grid: &ProfileGrid) -> Result<Outcome> {
    let l1 = s.env.lambda1;
    let rep = laplace_identity_check(&s.p, s.c, grid, &[0.25 * l1, 0.5 * l1, 0.75 * l1], s.eq.i_star)?;
    let errs: Vec<String> = rep
        .samples
        .iter()
        .map(|x| format!("s={:.4}: {:.2e}", x.s, x.rel_error))
        .collect();
    outcome(rep.pass, format!("relative errors [{}]", errs.join(", ")))
}

fn lattice_speed() -> Result<Outcome> {
    let cfg = SimConfig::default();
    let speed = |theta: f64| -> Result<(f64, f64)> {
        let p = ModelParams { theta, ..ModelParams::standard() };
        let out = run(&p, &cfg)?;
        let fit = out
            .trace
            .fit
            .ok_or_else(|| lattice_wave::Error::Domain(out.trace.fit_error.unwrap_or_default()))?;
        Ok((fit.speed, fit.r_squared))
    };
    let c_star = find_critical(&ModelParams::standard())?.c_star;
    let (v, r2) = speed(FRAC_PI_4)?;
    let (v6, _) = speed(FRAC_PI_6)?;
    let (v3, _) = speed(FRAC_PI_3)?;
    let off = (v - c_star).abs() / c_star;
    let sym = (v6 - v3).abs() / v6.max(v3);
    outcome(
        off < 0.1 && r2 > 0.995 && sym < 0.02,
        format!(
            "θ=π/4 speed {v:.4} vs c*={c_star:.4} ({:.2}% off), r²={r2:.5}; π/6 {v6:.4} vs π/3 {v3:.4} ({:.2}% apart)",
            100.0 * off,
            100.0 * sym
        ),
    )
}

fn threshold_behaviour() -> Result<Outcome> {
    let low = ModelParams { beta: 0.5, ..ModelParams::standard() };
    let cfg = SimConfig {
        extinction_level: Some(1e-8),
        ..SimConfig::default()
    };
    let out = run(&low, &cfg)?;
    let p = ModelParams::standard();
    let c_star = find_critical(&p)?.c_star;
    let probe = nonexistence_probe(&p, 0.5 * c_star, &SimConfig::default())?;
    outcome(
        out.summary.extinct && probe.pass,
        format!(
            "R0={} max I {:.2e} at t={}; probe c_test={:.4}: min Δ={:.4} (grid {:.4}), observed speed {:.4}",
            low.r0(),
            out.summary.max_i_final,
            out.summary.t_final,
            probe.c_test,
            probe.min_delta,
            probe.min_delta_grid,
            probe.observed_speed.unwrap_or(f64::NAN)
        ),
    )
}

fn scalar_rk4(p: &ModelParams, mut y: [f64; 3], dt: f64, steps: usize) -> [f64; 3] {
    let f = |y: [f64; 3]| {
        let inc = p.beta * y[0] * y[1] / (1.0 + p.alpha * y[1]);
        [
            p.recruitment - inc - p.mu1 * y[0],
            inc - p.mu2 * y[1],
            p.gamma * y[1] - p.mu1 * y[2],
        ]
    };
    let add = |a: [f64; 3], k: [f64; 3], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]];
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(add(y, k1, dt / 2.0));
        let k3 = f(add(y, k2, dt / 2.0));
        let k4 = f(add(y, k3, dt));
        for c in 0..3 {
            y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    y
}

fn equilibrium_stationarity() -> Result<Outcome> {
    let p = ModelParams::standard();
    let eq = Equilibria::new(&p)?;
    let r_star = p.gamma * eq.i_star / p.mu1;
    let start = LatticeState::uniform(50, 50, eq.s_star, eq.i_star, r_star);
    let mut st = start.clone();
    let mut integ = Integrator::new(&p, 50, 50, Boundary::Copy, true);
    for _ in 0..200 {
        integ.step(&mut st, 0.05)?;
    }
    let drift = [(&st.s, &start.s), (&st.i, &start.i), (&st.r, &start.r)]
        .iter()
        .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
        / st.t;

    let q = ModelParams { d1: 0.0, d2: 0.0, d3: 0.0, ..p };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut st = LatticeState::uniform(20, 20, 0.0, 0.0, 0.0);
    for v in st.s.iter_mut().chain(st.i.iter_mut()).chain(st.r.iter_mut()) {
        *v = rng.gen_range(0.0..1.5);
    }
    let init = st.clone();
    let mut integ = Integrator::new(&q, 20, 20, Boundary::Copy, true);
    let (dt, steps) = (0.05, 200);
    for _ in 0..steps {
        integ.step(&mut st, dt)?;
    }
    let mut oracle_gap = 0.0f64;
    for n in 0..st.s.len() {
        let y = scalar_rk4(&q, [init.s[n], init.i[n], init.r[n]], dt, steps);
        oracle_gap = oracle_gap
            .max((st.s[n] - y[0]).abs())
            .max((st.i[n] - y[1]).abs())
            .max((st.r[n] - y[2]).abs());
    }
    outcome(
        drift < 1e-10 && oracle_gap < 1e-8,
        format!("equilibrium drift {drift:.1e} per unit time; zero-diffusion oracle gap {oracle_gap:.1e}"),
    )
}

fn report(n: usize, budget: Option<Duration>, start: Instant, res: Result<Outcome>) -> bool {
    let elapsed = start.elapsed();
    let (pass, detail) = match res {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let ok = pass && in_time;
    let limit = budget.map_or(String::new(), |b| format!(" / {:.0} s", b.as_secs_f64()));
    println!(
        "criterion {n:>2}: {}  [{:.2} s{limit}]  {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let mut results = Vec::new();

    let t = Instant::now();
    results.push(report(1, secs(1), t, dispersion_certificates()));
    let t = Instant::now();
    results.push(report(2, secs(1), t, derivative_oracle()));

    let s = match setup() {
        Ok(s) => s,
        Err(e) => {
            println!("setup failed: {e}");
            std::process::exit(1);
        }
    };
    let t = Instant::now();
    results.push(report(3, secs(5), t, envelope_certificate(&s)));
    let t = Instant::now();
    results.push(report(4, secs(60), t, fixed_point_existence(&s)));

    let t = Instant::now();
    let wide = solve_fixed_point(&s.p, s.c, &s.env, 80.0, 0.05, SolveOptions::default());
    match wide {
        Ok((grid, rep)) if rep.converged => {
            results.push(report(5, secs(120), t, Ok(boundary_behaviour(&s, &grid))));
            let t = Instant::now();
            results.push(report(6, None, t, Ok(a_priori_bounds(&s, &grid))));
            let t = Instant::now();
            results.push(report(7, secs(10), t, lyapunov_monotonicity(&s, &grid)));
            let t = Instant::now();
            results.push(report(8, secs(5), t, laplace_identity(&s, &grid)));
        }
        other => {
            let why = match other {
                Ok((_, rep)) => format!("X=80 solve did not converge ({} iterations)", rep.iterations),
                Err(e) => format!("X=80 solve failed: {e}"),
            };
            for n in 5..=8 {
                results.push(report(n, None, t, outcome(false, why.clone())));
            }
        }
    }

    let t = Instant::now();
    results.push(report(9, secs(300), t, lattice_speed()));
    let t = Instant::now();
    results.push(report(10, secs(180), t, threshold_behaviour()));
    let t = Instant::now();
    results.push(report(11, None, t, equilibrium_stationarity()));

    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
