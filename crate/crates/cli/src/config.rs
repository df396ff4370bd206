//! Experiment configuration: strict JSON schema, dot-path overrides and
//! validation.

use std::path::{Path, PathBuf};

use lattice_wave::lattice::SimConfig;
use lattice_wave::{ModelParams, ValidationMode};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Dispersion,
    VerifyBounds,
    Profile,
    Lyapunov,
    Simulate,
    ProbeNonexistence,
    FullPipeline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Dispersion => "dispersion",
            Mode::VerifyBounds => "verify-bounds",
            Mode::Profile => "profile",
            Mode::Lyapunov => "lyapunov",
            Mode::Simulate => "simulate",
            Mode::ProbeNonexistence => "probe-nonexistence",
            Mode::FullPipeline => "full-pipeline",
        }
    }

    /// Modes that build wave profiles need θ inside the first quadrant.
    fn validation(self) -> ValidationMode {
        match self {
            Mode::Simulate | Mode::ProbeNonexistence | Mode::Dispersion => ValidationMode::Simulation,
            _ => ValidationMode::Profile,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "ModelParams::standard")]
    pub params: ModelParams,
    /// Must match the subcommand when given.
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default = "default_out", skip_serializing)]
    pub output_dir: PathBuf,
    /// Extra plot-ready CSVs.
    #[serde(default)]
    pub emit_plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::standard(),
            mode: None,
            numerics: Numerics::default(),
            output_dir: default_out(),
            emit_plots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Wave speed; `speed_factor`·c* when absent.
    pub speed: Option<f64>,
    pub speed_factor: f64,
    pub h: f64,
    pub tol: f64,
    pub maxit: usize,
    /// Monotonization constant of the profile operator; 1.1·β·I₀ when absent.
    pub kappa: Option<f64>,
    /// Increasing half-widths for the profile solve; the last one is kept.
    pub x_list: Vec<f64>,
    pub bounds_range: [f64; 2],
    pub bounds_points: usize,
    /// Rows of envelope_residuals.csv.
    pub residual_csv_points: usize,
    pub residual_tolerance: f64,
    pub boundary_tolerance: f64,
    pub right_tolerance: f64,
    /// Laplace sample points as fractions of λ₁.
    pub laplace_fractions: Vec<f64>,
    pub lyapunov_eps: f64,
    pub lyapunov_agreement: f64,
    pub speed_tolerance: f64,
    pub min_r_squared: f64,
    /// Probe speed as a fraction of c*.
    pub probe_factor: f64,
    /// Also run θ → π/2 − θ and compare speeds.
    pub symmetry_check: bool,
    pub symmetry_tolerance: f64,
    pub lattice: SimConfig,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            speed: None,
            speed_factor: 1.5,
            h: 0.05,
            tol: 1e-8,
            maxit: 10_000,
            kappa: None,
            x_list: vec![20.0, 40.0, 60.0, 80.0],
            bounds_range: [-200.0, 200.0],
            bounds_points: 100_000,
            residual_csv_points: 4001,
            residual_tolerance: 5e-3,
            boundary_tolerance: 1e-3,
            right_tolerance: 0.05,
            laplace_fractions: vec![0.25, 0.5, 0.75],
            lyapunov_eps: 1e-7,
            lyapunov_agreement: 0.99,
            speed_tolerance: 0.1,
            min_r_squared: 0.995,
            probe_factor: 0.5,
            symmetry_check: false,
            symmetry_tolerance: 0.02,
            lattice: SimConfig::default(),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn unit_interval(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must lie in (0, 1), got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(invalid(
                    "mode",
                    format!("config says `{}` but the subcommand is `{}`", m.name(), mode.name()),
                ));
            }
        }
        self.params
            .validate(mode.validation())
            .map_err(|e| invalid("params", e.to_string()))?;
        let n = &self.numerics;
        if let Some(c) = n.speed {
            positive("numerics.speed", c)?;
        } else {
            positive("numerics.speed_factor", n.speed_factor)?;
        }
        positive("numerics.h", n.h)?;
        if n.h > 1.0 {
            return Err(invalid("numerics.h", format!("must not exceed 1, got {}", n.h)));
        }
        positive("numerics.tol", n.tol)?;
        if n.maxit == 0 {
            return Err(invalid("numerics.maxit", "must be at least 1"));
        }
        if n.x_list.is_empty() || n.x_list.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(invalid("numerics.x_list", "needs positive finite half-widths"));
        }
        if n.x_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("numerics.x_list", "must be strictly increasing"));
        }
        if let Some(k) = n.kappa {
            positive("numerics.kappa", k)?;
        }
        let [lo, hi] = n.bounds_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(invalid("numerics.bounds_range", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if n.bounds_points < 2 {
            return Err(invalid("numerics.bounds_points", "need at least 2 points"));
        }
        if n.residual_csv_points < 2 {
            return Err(invalid("numerics.residual_csv_points", "need at least 2 points"));
        }
        positive("numerics.residual_tolerance", n.residual_tolerance)?;
        positive("numerics.boundary_tolerance", n.boundary_tolerance)?;
        positive("numerics.right_tolerance", n.right_tolerance)?;
        if n.laplace_fractions.is_empty() {
            return Err(invalid("numerics.laplace_fractions", "needs at least one sample"));
        }
        for &f in &n.laplace_fractions {
            unit_interval("numerics.laplace_fractions", f)?;
        }
        positive("numerics.lyapunov_eps", n.lyapunov_eps)?;
        if !(n.lyapunov_agreement > 0.0 && n.lyapunov_agreement <= 1.0) {
            return Err(invalid("numerics.lyapunov_agreement", "must lie in (0, 1]"));
        }
        positive("numerics.speed_tolerance", n.speed_tolerance)?;
        unit_interval("numerics.min_r_squared", n.min_r_squared)?;
        unit_interval("numerics.probe_factor", n.probe_factor)?;
        positive("numerics.symmetry_tolerance", n.symmetry_tolerance)?;
        n.lattice
            .validate()
            .map_err(|e| invalid("numerics.lattice", e.to_string()))?;
        Ok(())
    }
}

/// Sets `path` (dot-separated; numeric segments index arrays) to `value`,
/// creating objects along the way. The value is parsed as JSON and taken as
/// a string when that fails.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let bad = |why: &str| CliError::Override {
        spec: spec.to_string(),
        reason: why.to_string(),
    };
    let (path, raw) = spec.split_once('=').ok_or_else(|| bad("expected KEY=VALUE"))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(bad("empty key segment"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (k, seg) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| bad("array segment must be an index"))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| bad(&format!("index {idx} out of range for length {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad(&format!("`{seg}` is below a scalar"))),
        };
    }
    unreachable!("the last segment returns")
}

fn parse_error(path: &Path, e: serde_json::Error) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Reads and strictly deserializes a config (defaults without a path), then
/// applies the overrides to the complete config.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Read {
                path: p.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| parse_error(p, e))?
        }
        None => ExperimentConfig::default(),
    };
    if overrides.is_empty() {
        return Ok(cfg);
    }
    let mut root = serde_json::to_value(&cfg).expect("config serializes");
    root["output_dir"] = Value::String(cfg.output_dir.to_string_lossy().into_owned());
    for spec in overrides {
        apply_override(&mut root, spec)?;
    }
    serde_json::from_value(root).map_err(|e| CliError::Schema {
        origin: format!("override of {}", path.unwrap_or(Path::new("<defaults>")).display()),
        message: e.to_string(),
    })
}
