//! The experiment steps. Each step appends certificates and a results entry
//! and writes its own files.

use std::f64::consts::FRAC_PI_2;

use lattice_wave::bounds::{envelope_residuals, select_envelope, uniform_grid, verify_upper_lower, EnvelopeParams, Inequality};
use lattice_wave::dispersion::{classify_speed, delta, find_critical, find_roots_with, CharacteristicFn, CriticalPair, RootPair};
use lattice_wave::lattice::{self, nonexistence_probe, projected_profile, RunOutput};
use lattice_wave::lyapunov::{derivative_agreement, lyapunov_trace, monotonicity_report};
use lattice_wave::profile::{
    default_kappa, derivative_bounds_check, extend_domain, laplace_identity_check, positivity_check,
    ratio_bounds_check, residual, residual_profile, ProfileGrid, SolveOptions,
};
use lattice_wave::{Certificate, Equilibria, Error, ModelParams};
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Mode};
use crate::error::CliError;
use crate::output::OutputDir;

/// Violations listed in full before the JSON report truncates.
const MAX_LISTED: usize = 100;

pub struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: OutputDir,
    pub certificates: Vec<Certificate>,
    pub results: Map<String, Value>,
}

pub struct Wave {
    pub crit: CriticalPair,
    pub c: f64,
    pub roots: Option<RootPair>,
}

impl Wave {
    fn roots(&self) -> Result<RootPair, CliError> {
        self.roots.ok_or(CliError::Core(Error::SubcriticalSpeed {
            c: self.c,
            c_star: self.crit.c_star,
        }))
    }
}

fn cert(name: &str, pass: bool, margin: f64, detail: String) -> Certificate {
    Certificate {
        name: name.to_string(),
        pass,
        margin,
        detail,
    }
}

fn to_value<T: serde::Serialize + ?Sized>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a ExperimentConfig, out: OutputDir) -> Self {
        Self {
            cfg,
            out,
            certificates: Vec::new(),
            results: Map::new(),
        }
    }

    fn p(&self) -> ModelParams {
        self.cfg.params
    }

    pub fn execute(&mut self, mode: Mode) -> Result<(), CliError> {
        match mode {
            Mode::Dispersion => {
                self.dispersion()?;
            }
            Mode::VerifyBounds => {
                let wave = self.dispersion()?;
                self.bounds(&wave)?;
            }
            Mode::Profile => {
                let wave = self.dispersion()?;
                let env = self.bounds(&wave)?;
                self.profile(&wave, &env)?;
            }
            Mode::Lyapunov => {
                let wave = self.dispersion()?;
                let env = self.bounds(&wave)?;
                let grid = self.profile(&wave, &env)?;
                self.lyapunov(&wave, &grid)?;
            }
            Mode::Simulate => self.simulate()?,
            Mode::ProbeNonexistence => self.probe()?,
            Mode::FullPipeline => {
                let wave = self.dispersion()?;
                let env = self.bounds(&wave)?;
                let grid = self.profile(&wave, &env)?;
                self.lyapunov(&wave, &grid)?;
                self.simulate()?;
            }
        }
        Ok(())
    }

    fn dispersion(&mut self) -> Result<Wave, CliError> {
        let p = self.p();
        let n = &self.cfg.numerics;
        let tol = CharacteristicFn::new(&p).tolerance();
        let crit = find_critical(&p)?;
        let worst = crit.min_value.abs().max(crit.slope_value.abs());
        self.certificates.push(Certificate::new(
            "critical_pair",
            tol - worst,
            format!("|Δ|, |∂Δ/∂λ| at (c*, λ*) <= {worst:e}, tolerance {tol:e}"),
        ));
        let c = n.speed.unwrap_or(n.speed_factor * crit.c_star);
        let class = classify_speed(&p, c)?;
        let roots = if c > crit.c_star {
            match find_roots_with(&p, c, &crit) {
                Ok(r) => Some(r),
                Err(Error::SubcriticalSpeed { .. }) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        let mut result = json!({
            "c_star": crit.c_star,
            "lambda_star": crit.lambda_star,
            "c": c,
            "speed_class": class,
            "tolerance": tol,
        });
        if let Some(r) = roots {
            let (l1, l2) = (r.lambda1, r.lambda2);
            let res = delta(&p, c, l1)?.abs().max(delta(&p, c, l2)?.abs());
            let ordered = l1 < crit.lambda_star && crit.lambda_star < l2;
            self.certificates.push(cert(
                "roots",
                ordered && res < tol,
                tol - res,
                format!("λ1 = {l1}, λ2 = {l2}, max |Δ| = {res:e}"),
            ));
            let mut margin = f64::INFINITY;
            let mut errors = 0;
            for k in 1..=1000 {
                let l = 2.0 * l2 * k as f64 / 1000.0;
                if (l - l1).abs() < 1e-9 || (l - l2).abs() < 1e-9 {
                    continue;
                }
                let sign = if l < l1 || l > l2 { 1.0 } else { -1.0 };
                let v = sign * delta(&p, c, l)?;
                margin = margin.min(v);
                if !(v > 0.0) {
                    errors += 1;
                }
            }
            self.certificates.push(cert(
                "sign_pattern",
                errors == 0,
                margin,
                format!("{errors} of 1000 samples on (0, 2λ2] with the wrong sign"),
            ));
            result["lambda1"] = json!(l1);
            result["lambda2"] = json!(l2);
            if self.cfg.emit_plots {
                let top = 2.0 * l2;
                let rows = (0..=1000).map(|k| {
                    let l = top * k as f64 / 1000.0;
                    vec![
                        l,
                        delta(&p, c, l).unwrap_or(f64::NAN),
                        delta(&p, crit.c_star, l).unwrap_or(f64::NAN),
                    ]
                });
                self.out.write_csv("dispersion_curve.csv", &["lambda", "delta_c", "delta_c_star"], rows)?;
            }
        }
        self.results.insert("dispersion".into(), result);
        Ok(Wave { crit, c, roots })
    }

    fn bounds(&mut self, wave: &Wave) -> Result<EnvelopeParams, CliError> {
        let p = self.p();
        let n = &self.cfg.numerics;
        let c = wave.c;
        let env = select_envelope(&p, c, &wave.roots()?)?;
        let [lo, hi] = n.bounds_range;
        let (grid, step) = uniform_grid(lo, hi, n.bounds_points);
        let report = verify_upper_lower(&p, c, &env, &grid, step);
        let margin = report
            .summaries
            .iter()
            .map(|s| s.min_slack)
            .fold(f64::INFINITY, f64::min);
        self.certificates.push(cert(
            "envelope",
            report.passed(),
            margin,
            format!(
                "{} violations over {} points ({} guarded)",
                report.violations.len(),
                report.points_checked,
                report.points_guarded
            ),
        ));
        self.out.write_json(
            "bounds_report.json",
            &json!({
                "c": c,
                "envelope": env,
                "range": [lo, hi],
                "points_checked": report.points_checked,
                "points_guarded": report.points_guarded,
                "summaries": report.summaries,
                "violations_total": report.violations.len(),
                "violations": &report.violations[..report.violations.len().min(MAX_LISTED)],
            }),
        )?;
        let (xs, _) = uniform_grid(lo, hi, n.residual_csv_points);
        let mut header = vec!["xi", "S_upper", "S_lower", "I_upper", "I_lower"];
        header.extend(Inequality::ALL.iter().map(|q| q.label()));
        let rows = xs.iter().map(|&xi| {
            let r = envelope_residuals(&p, c, &env, xi);
            let mut row = vec![xi, env.upper_s(xi), env.lower_s(xi), env.upper_i(xi), env.lower_i(xi)];
            row.extend(r.oriented);
            row
        });
        self.out.write_csv("envelope_residuals.csv", &header, rows)?;
        self.results.insert(
            "bounds".into(),
            json!({ "envelope": env, "violations": report.violations.len(), "margin": margin }),
        );
        Ok(env)
    }

    fn profile(&mut self, wave: &Wave, env: &EnvelopeParams) -> Result<ProfileGrid, CliError> {
        let p = self.p();
        let n = &self.cfg.numerics;
        let c = wave.c;
        let opts = SolveOptions {
            tol: n.tol,
            maxit: n.maxit,
            kappa: n.kappa,
        };
        let kappa = n.kappa.unwrap_or_else(|| default_kappa(&p, env));
        let (grid, ext) = extend_domain(&p, c, env, &n.x_list, n.h, opts)?;
        let eq = Equilibria::new(&p)?;
        let last = grid.len() - 1;
        let max_its = ext.steps.iter().map(|s| s.iterations).max().unwrap_or(0);
        let mut certs = vec![cert(
            "profile_converged",
            ext.all_converged,
            n.maxit as f64 - max_its as f64,
            format!("at most {max_its} iterations of {} over X = {:?}", n.maxit, n.x_list),
        )];
        let gap = grid.envelope_gap();
        certs.push(Certificate::new(
            "profile_in_gamma",
            1e-12 - gap,
            format!("largest envelope excursion {gap:e}"),
        ));
        let res = residual(&p, &grid);
        certs.push(Certificate::new(
            "profile_residual",
            n.residual_tolerance - res,
            format!("max residual {res:e}, tolerance {:e}", n.residual_tolerance),
        ));
        let left_s = (grid.s[0] - p.s0()).abs();
        let left_i = grid.i[0];
        certs.push(Certificate::new(
            "boundary_left",
            n.boundary_tolerance - left_s.max(left_i),
            format!("|S(-X) - S0| = {left_s:e}, I(-X) = {left_i:e}"),
        ));
        let right = ((grid.s[last] - eq.s_star) / eq.s_star)
            .abs()
            .max(((grid.i[last] - eq.i_star) / eq.i_star).abs());
        certs.push(Certificate::new(
            "boundary_right",
            n.right_tolerance - right,
            format!("(S, I)(X) = ({}, {}), relative gap {right:e}", grid.s[last], grid.i[last]),
        ));
        let changes: Vec<f64> = ext.steps.iter().filter_map(|s| s.window_change).collect();
        let cauchy_margin = changes.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::min);
        certs.push(cert(
            "domain_extension",
            ext.cauchy,
            cauchy_margin,
            format!("window changes on [-{0}, {0}]: {changes:?}", ext.window),
        ));
        let pos = positivity_check(&grid);
        certs.push(cert(
            "positivity",
            pos.pass,
            pos.min_s.min(pos.min_gap_to_s0).min(pos.min_i),
            format!("min S {:e}, min S0 - S {:e}, min I {:e}", pos.min_s, pos.min_gap_to_s0, pos.min_i),
        ));
        let db = derivative_bounds_check(&p, c, &grid);
        certs.push(cert(
            "derivative_bounds",
            db.pass,
            db.margin,
            format!("max|S'| {} <= N1 {}, max|I'| {} <= N2 {}", db.max_abs_ds, db.n1, db.max_abs_di, db.n2),
        ));
        let rb = ratio_bounds_check(&p, c, &grid);
        let ratio_margin = rb
            .ratios
            .iter()
            .map(|r| r.bound - r.max_observed)
            .fold(f64::INFINITY, f64::min);
        certs.push(cert(
            "ratio_bounds",
            rb.pass,
            ratio_margin,
            format!("nu = {}, log-derivative range [{}, {}]", rb.nu, rb.min_log_derivative, rb.max_log_derivative),
        ));
        let samples: Vec<f64> = n.laplace_fractions.iter().map(|f| f * env.lambda1).collect();
        let lap = laplace_identity_check(&p, c, &grid, &samples, eq.i_star)?;
        let worst_lap = lap.samples.iter().map(|s| s.rel_error).fold(0.0, f64::max);
        certs.push(cert(
            "laplace_identity",
            lap.pass,
            lap.rel_tol - worst_lap,
            format!("largest relative error {worst_lap:e} over {} samples", lap.samples.len()),
        ));
        self.certificates.extend(certs);

        let resid = residual_profile(&p, &grid);
        let rows = (0..grid.len()).map(|k| {
            let xi = grid.xi(k);
            vec![
                xi,
                grid.s[k],
                grid.i[k],
                env.upper_s(xi),
                env.lower_s(xi),
                env.upper_i(xi),
                env.lower_i(xi),
                resid[k],
            ]
        });
        self.out.write_csv(
            "profile.csv",
            &["xi", "S", "I", "S_upper", "S_lower", "I_upper", "I_lower", "residual"],
            rows,
        )?;
        if self.cfg.emit_plots {
            let rows = (0..grid.len()).map(|k| vec![grid.xi(k), grid.i[k].ln(), (p.s0() - grid.s[k]).ln()]);
            self.out.write_csv("profile_log.csv", &["xi", "ln_I", "ln_S0_minus_S"], rows)?;
        }
        let mut positivity = to_value(&pos);
        positivity["violations"] = to_value(&pos.violations[..pos.violations.len().min(MAX_LISTED)]);
        let report = json!({
            "c": c,
            "half_width": grid.half_width,
            "h": grid.h,
            "kappa": kappa,
            "residual": res,
            "envelope_gap": gap,
            "boundary": {
                "left_gap_s": left_s,
                "left_i": left_i,
                "right_s": grid.s[last],
                "right_i": grid.i[last],
                "right_relative_gap": right,
                "s_star": eq.s_star,
                "i_star": eq.i_star,
            },
            "extension": ext,
            "positivity": positivity,
            "derivative_bounds": db,
            "ratio_bounds": rb,
            "laplace": lap,
        });
        self.out.write_json("profile_report.json", &report)?;
        self.results.insert(
            "profile".into(),
            json!({ "half_width": grid.half_width, "h": grid.h, "residual": res, "kappa": kappa }),
        );
        Ok(grid)
    }

    fn lyapunov(&mut self, wave: &Wave, grid: &ProfileGrid) -> Result<(), CliError> {
        let p = self.p();
        let n = &self.cfg.numerics;
        let eq = Equilibria::new(&p)?;
        let trace = lyapunov_trace(&p, wave.c, &eq, grid)?;
        let mono = monotonicity_report(&trace, n.lyapunov_eps);
        let agree = derivative_agreement(&trace, n.lyapunov_agreement);
        let max_dl = trace.dl_numeric.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.certificates.push(cert(
            "lyapunov_monotone",
            mono.pass,
            mono.eps - max_dl,
            format!("{}/{} nodes with dL/dξ <= {:e}", mono.compliant, mono.nodes, mono.eps),
        ));
        self.certificates.push(cert(
            "lyapunov_agreement",
            agree.pass,
            agree.fraction - n.lyapunov_agreement,
            format!(
                "{:.4} of nodes within {:e}, largest gap {:e}",
                agree.fraction, agree.tol, agree.max_abs_diff
            ),
        ));
        let rows = (0..trace.xs.len())
            .map(|k| vec![trace.xs[k], trace.l[k], trace.dl_analytic[k], trace.dl_numeric[k]]);
        self.out
            .write_csv("lyapunov.csv", &["xi", "L", "dL_analytic", "dL_numeric"], rows)?;
        self.out.write_json(
            "lyapunov_report.json",
            &json!({
                "monotonicity": mono,
                "agreement": agree,
                "min_l": trace.min_l,
                "max_positive_dl": trace.max_positive_dl,
                "nodes": trace.xs.len(),
            }),
        )?;
        self.results.insert(
            "lyapunov".into(),
            json!({ "compliant_fraction": mono.fraction, "agreement_fraction": agree.fraction }),
        );
        Ok(())
    }

    fn run_lattice(&mut self, p: &ModelParams, trace_name: &str) -> Result<RunOutput, CliError> {
        let out = lattice::run(p, &self.cfg.numerics.lattice)?;
        let rows = out
            .trace
            .times
            .iter()
            .zip(&out.trace.positions)
            .map(|(t, x)| vec![*t, *x]);
        self.out.write_csv(trace_name, &["t", "xi_front"], rows)?;
        Ok(out)
    }

    fn simulate(&mut self) -> Result<(), CliError> {
        let p = self.p();
        let n = &self.cfg.numerics;
        let out = self.run_lattice(&p, "front_trace.csv")?;
        for (k, st) in out.snapshots.iter().enumerate() {
            self.out.write(&format!("snapshots/snapshot_{k:05}.bin"), &st.to_le_bytes())?;
        }
        if self.cfg.emit_plots {
            let rows = projected_profile(&out.final_state, p.theta)
                .into_iter()
                .map(|b| vec![b.xi, b.s, b.i]);
            self.out.write_csv("final_profile.csv", &["xi", "S", "I"], rows)?;
        }
        let fit = out.trace.fit.as_ref();
        let speed = fit.map(|f| f.speed);
        let mut result = json!({
            "speed": speed,
            "r_squared": fit.map(|f| f.r_squared),
            "fit_window": fit.map(|f| f.fit_window),
            "fit_samples": fit.map(|f| f.samples),
            "fit_error": out.trace.fit_error,
            "run": out.summary,
            "snapshots": out.snapshots.len(),
        });
        if p.r0() > 1.0 {
            let c_star = find_critical(&p)?.c_star;
            result["c_star"] = json!(c_star);
            result["ratio"] = json!(speed.map(|v| v / c_star));
            match fit {
                Some(f) => {
                    let off = (f.speed - c_star).abs() / c_star;
                    self.certificates.push(Certificate::new(
                        "front_speed",
                        n.speed_tolerance - off,
                        format!("speed {} vs c* {c_star}, relative gap {off:e}", f.speed),
                    ));
                    self.certificates.push(Certificate::new(
                        "front_fit",
                        f.r_squared - n.min_r_squared,
                        format!("r^2 = {} over {} samples", f.r_squared, f.samples),
                    ));
                }
                None => self.certificates.push(cert(
                    "front_speed",
                    false,
                    -1.0,
                    format!("no speed fit: {}", out.trace.fit_error.clone().unwrap_or_default()),
                )),
            }
            if n.symmetry_check {
                let mirror = ModelParams {
                    theta: FRAC_PI_2 - p.theta,
                    ..p
                };
                let other = self.run_lattice(&mirror, "front_trace_mirror.csv")?;
                let v2 = other.trace.fit.as_ref().map(|f| f.speed);
                result["mirror_speed"] = json!(v2);
                match (speed, v2) {
                    (Some(a), Some(b)) => {
                        let rel = (a - b).abs() / a.max(b);
                        self.certificates.push(Certificate::new(
                            "direction_symmetry",
                            n.symmetry_tolerance - rel,
                            format!("speeds {a} at θ and {b} at π/2 - θ, relative gap {rel:e}"),
                        ));
                    }
                    _ => self.certificates.push(cert(
                        "direction_symmetry",
                        false,
                        -1.0,
                        "a speed fit is missing".into(),
                    )),
                }
            }
        } else {
            let floor = n.lattice.extinction_level.unwrap_or(1e-8);
            let max_i = out.summary.max_i_final;
            self.certificates.push(Certificate::new(
                "extinction",
                floor - max_i,
                format!("R0 = {}: max I = {max_i:e} at t = {}", p.r0(), out.summary.t_final),
            ));
        }
        self.results.insert("simulation".into(), result);
        Ok(())
    }

    fn probe(&mut self) -> Result<(), CliError> {
        let p = self.p();
        let n = &self.cfg.numerics;
        let c_star = find_critical(&p)?.c_star;
        let rep = nonexistence_probe(&p, n.probe_factor * c_star, &n.lattice)?;
        let outrun = rep.observed_speed.map_or(-1.0, |v| v / rep.c_test - 1.0);
        self.certificates.push(cert(
            "nonexistence_probe",
            rep.pass,
            rep.min_delta.min(rep.min_delta_grid).min(outrun),
            format!(
                "c_test = {}: min Δ = {}, observed speed {:?}",
                rep.c_test, rep.min_delta, rep.observed_speed
            ),
        ));
        self.results.insert("probe".into(), to_value(&rep));
        Ok(())
    }
}
