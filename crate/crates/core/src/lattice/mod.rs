//! Direct integration of the lattice system
//!
//! S′ = d₁ΔS + Λ − βSI/(1+αI) − μ₁S,  I′ = d₂ΔI + βSI/(1+αI) − μ₂I,  R′ = d₃ΔR + γI − μ₁R
//!
//! on an Ni × Nj grid with the four-neighbour Laplacian, classical RK4 in
//! time, and front tracking along ξ = i cosθ + j sinθ.

mod front;

pub use front::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{find_critical, CharacteristicFn};
use crate::error::{Error, Result};
use crate::model::{endemic_equilibrium, ModelParams};

/// Values in [−NEG_CLAMP, 0) after a step are set to zero; anything lower aborts.
pub const NEG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Replicate the edge value (zero flux).
    #[default]
    Copy,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitShape {
    /// Sites with the lowest projections, covering `fraction` of the grid.
    HalfPlane { fraction: f64 },
    /// Sites strictly inside a disk around the grid centre.
    Disk { radius: f64 },
}

pub const DEFAULT_SEED_FRACTION: f64 = 0.15;

impl Default for InitShape {
    fn default() -> Self {
        InitShape::HalfPlane {
            fraction: DEFAULT_SEED_FRACTION,
        }
    }
}

fn default_dim() -> usize {
    400
}
fn default_dt() -> f64 {
    0.05
}
fn default_t_end() -> f64 {
    80.0
}
fn default_record_every() -> f64 {
    0.5
}
fn default_window_fraction() -> f64 {
    0.5
}
fn default_edge_margin() -> f64 {
    20.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_dim")]
    pub ni: usize,
    #[serde(default = "default_dim")]
    pub nj: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub init_shape: InitShape,
    /// Seed infection density; I* when absent and R₀ > 1, else 0.1·S₀.
    #[serde(default)]
    pub init_level: Option<f64>,
    /// Tracking level; half the seed level when absent.
    #[serde(default)]
    pub front_level: Option<f64>,
    /// Time between front samples.
    #[serde(default = "default_record_every")]
    pub record_every: f64,
    /// Time between stored snapshots; none are kept when absent.
    #[serde(default)]
    pub snapshot_every: Option<f64>,
    #[serde(default = "default_window_fraction")]
    pub window_fraction: f64,
    /// The run stops once the front is this close (in ξ) to the far edge.
    #[serde(default = "default_edge_margin")]
    pub edge_margin: f64,
    /// Relative amplitude of a uniform random modulation of the seed.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub integrate_r: bool,
    /// Stop once the largest I drops below this value.
    #[serde(default)]
    pub extinction_level: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            ni: default_dim(),
            nj: default_dim(),
            dt: default_dt(),
            t_end: default_t_end(),
            boundary: Boundary::Copy,
            init_shape: InitShape::default(),
            init_level: None,
            front_level: None,
            record_every: default_record_every(),
            snapshot_every: None,
            window_fraction: default_window_fraction(),
            edge_margin: default_edge_margin(),
            jitter: 0.0,
            seed: 0,
            integrate_r: true,
            extinction_level: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.ni < 3 || self.nj < 3 {
            return bad("lattice needs at least 3 x 3 sites");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.record_every > 0.0) {
            return bad("record_every must be positive");
        }
        if matches!(self.snapshot_every, Some(v) if !(v > 0.0)) {
            return bad("snapshot_every must be positive");
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return bad("window_fraction must lie in (0, 1]");
        }
        if !(self.jitter >= 0.0 && self.jitter < 1.0) {
            return bad("jitter must lie in [0, 1)");
        }
        if matches!(self.init_level, Some(v) if !(v > 0.0)) {
            return bad("init_level must be positive");
        }
        if matches!(self.front_level, Some(v) if !(v > 0.0)) {
            return bad("front_level must be positive");
        }
        match self.init_shape {
            InitShape::HalfPlane { fraction } if !(0.0..=1.0).contains(&fraction) => {
                bad("half-plane fraction must lie in [0, 1]")
            }
            InitShape::Disk { radius } if !(radius >= 0.0) => bad("disk radius must be nonnegative"),
            _ => Ok(()),
        }
    }

    pub fn seed_level(&self, p: &ModelParams) -> f64 {
        self.init_level.unwrap_or_else(|| match endemic_equilibrium(p) {
            Ok((_, i_star)) => i_star,
            Err(_) => 0.1 * p.s0(),
        })
    }

    pub fn tracking_level(&self, p: &ModelParams) -> f64 {
        self.front_level.unwrap_or_else(|| 0.5 * self.seed_level(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub ni: usize,
    pub nj: usize,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub t: f64,
}

impl LatticeState {
    pub fn uniform(ni: usize, nj: usize, s: f64, i: f64, r: f64) -> Self {
        let n = ni * nj;
        Self {
            ni,
            nj,
            s: vec![s; n],
            i: vec![i; n],
            r: vec![r; n],
            t: 0.0,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nj + j
    }

    pub fn max_i(&self) -> f64 {
        self.i.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_s(&self) -> f64 {
        self.s.iter().copied().fold(0.0, f64::max)
    }

    /// Largest projection i cosθ + j sinθ over the grid.
    pub fn max_projection(&self, theta: f64) -> f64 {
        let (c, s) = (theta.cos(), theta.sin());
        let (a, b) = ((self.ni - 1) as f64, (self.nj - 1) as f64);
        [0.0, a * c, b * s, a * c + b * s].into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Flat little-endian snapshot: Ni and Nj as u64, t as f64, then the
    /// S, I and R blocks in row-major order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let n = self.ni * self.nj;
        let mut out = Vec::with_capacity(24 + 24 * n);
        out.extend_from_slice(&(self.ni as u64).to_le_bytes());
        out.extend_from_slice(&(self.nj as u64).to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for block in [&self.s, &self.i, &self.r] {
            for v in block.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |k: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * k..8 * k + 8)
                .map(|b| b.try_into().expect("eight bytes"))
                .ok_or_else(|| Error::Domain("snapshot truncated".into()))
        };
        let ni = u64::from_le_bytes(word(0)?) as usize;
        let nj = u64::from_le_bytes(word(1)?) as usize;
        let t = f64::from_le_bytes(word(2)?);
        let n = ni * nj;
        if bytes.len() != 24 + 24 * n {
            return Err(Error::Domain(format!(
                "snapshot has {} bytes, expected {}",
                bytes.len(),
                24 + 24 * n
            )));
        }
        let block = |b: usize| -> Result<Vec<f64>> {
            (0..n).map(|k| word(3 + b * n + k).map(f64::from_le_bytes)).collect()
        };
        Ok(Self {
            ni,
            nj,
            s: block(0)?,
            i: block(1)?,
            r: block(2)?,
            t,
        })
    }
}

/// The initial lattice: S ≡ S₀, R ≡ 0 and I equal to the seed level on the
/// seed set, zero elsewhere.
pub fn init_lattice(p: &ModelParams, cfg: &SimConfig) -> Result<LatticeState> {
    cfg.validate()?;
    let mut st = LatticeState::uniform(cfg.ni, cfg.nj, p.s0(), 0.0, 0.0);
    let level = cfg.seed_level(p);
    let seed: Vec<usize> = match cfg.init_shape {
        InitShape::HalfPlane { fraction } => {
            let (c, s) = (p.cos_theta(), p.sin_theta());
            let mut order: Vec<(f64, usize)> = (0..cfg.ni)
                .flat_map(|i| (0..cfg.nj).map(move |j| (i, j)))
                .map(|(i, j)| (i as f64 * c + j as f64 * s, i * cfg.nj + j))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let want = (fraction * order.len() as f64).round() as usize;
            if want == 0 {
                Vec::new()
            } else {
                // close the half-plane: take every site tied with the last one
                let cut = order[want - 1].0;
                order.iter().take_while(|o| o.0 <= cut).map(|o| o.1).collect()
            }
        }
        InitShape::Disk { radius } => {
            let (ci, cj) = ((cfg.ni - 1) as f64 / 2.0, (cfg.nj - 1) as f64 / 2.0);
            (0..cfg.ni)
                .flat_map(|i| (0..cfg.nj).map(move |j| (i, j)))
                .filter(|&(i, j)| (i as f64 - ci).hypot(j as f64 - cj) < radius)
                .map(|(i, j)| i * cfg.nj + j)
                .collect()
        }
    };
    if seed.is_empty() {
        return Err(Error::InvalidConfig("seed set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for k in seed {
        let wobble = if cfg.jitter > 0.0 {
            1.0 + cfg.jitter * rng.gen_range(-1.0..1.0)
        } else {
            1.0
        };
        st.i[k] = level * wobble;
    }
    Ok(st)
}

/// Rate bound used by the step-size guard: 4·max d + β·max(S₀, max S) + max μ.
pub fn stiffness(p: &ModelParams, max_s: f64) -> f64 {
    4.0 * p.d1.max(p.d2).max(p.d3) + p.beta * p.s0().max(max_s) + p.mu1.max(p.mu2)
}

pub fn check_cfl(p: &ModelParams, dt: f64, max_s: f64) -> Result<()> {
    let k = dt * stiffness(p, max_s);
    if !(k < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "dt = {dt} violates the step guard: dt * rate = {k} >= 0.5"
        )));
    }
    Ok(())
}

#[inline]
fn neighbour(k: usize, n: usize, up: bool, boundary: Boundary) -> usize {
    match (up, boundary) {
        (true, _) if k + 1 < n => k + 1,
        (true, Boundary::Copy) => k,
        (true, Boundary::Periodic) => 0,
        (false, _) if k > 0 => k - 1,
        (false, Boundary::Copy) => k,
        (false, Boundary::Periodic) => n - 1,
    }
}

/// How a sweep combines the stage derivative k with the running sums.
#[derive(Clone, Copy)]
enum Fold {
    /// acc = y + a·k, next = y + b·k
    First,
    /// acc += a·k, next = y + b·k
    Middle,
    /// next = acc + a·k, clamped and checked
    Last,
}

type Fields<'a> = [&'a [f64]; 3];
type FieldsMut<'a> = [&'a mut [f64]; 3];

/// Classical RK4 with the stage combinations fused into the stencil sweeps.
pub struct Integrator {
    p: ModelParams,
    boundary: Boundary,
    integrate_r: bool,
    ni: usize,
    nj: usize,
    acc: [Vec<f64>; 3],
    stage: [[Vec<f64>; 3]; 2],
}

impl Integrator {
    pub fn new(p: &ModelParams, ni: usize, nj: usize, boundary: Boundary, integrate_r: bool) -> Self {
        let n = ni * nj;
        let buf = || [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        Self {
            p: *p,
            boundary,
            integrate_r,
            ni,
            nj,
            acc: buf(),
            stage: [buf(), buf()],
        }
    }

    /// Right-hand side of the lattice system at `src`, written into `out`.
    pub fn rhs(&self, src: Fields, out: FieldsMut) {
        let n = src[0].len();
        let zero = vec![0.0; n];
        let mut scratch = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let [x, y, z] = &mut scratch;
        self.sweep(src, [&zero, &zero, &zero], out, [x, y, z], 1.0, 0.0, Fold::First);
    }

    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &self,
        src: Fields,
        y: Fields,
        acc: FieldsMut,
        next: FieldsMut,
        a: f64,
        b: f64,
        fold: Fold,
    ) -> Option<(usize, usize, f64)> {
        let (p, nj, ni, bnd, with_r) = (self.p, self.nj, self.ni, self.boundary, self.integrate_r);
        let [s, i, r] = src;
        let [acc_s, acc_i, acc_r] = acc;
        let [next_s, next_i, next_r] = next;
        (
            acc_s.par_chunks_mut(nj),
            acc_i.par_chunks_mut(nj),
            acc_r.par_chunks_mut(nj),
            next_s.par_chunks_mut(nj),
            next_i.par_chunks_mut(nj),
            next_r.par_chunks_mut(nj),
        )
            .into_par_iter()
            .enumerate()
            .map_init(
                || [vec![0.0; nj], vec![0.0; nj], vec![0.0; nj]],
                |k, (row, (acc_s, acc_i, acc_r, next_s, next_i, next_r))| {
                    let up = neighbour(row, ni, true, bnd) * nj;
                    let down = neighbour(row, ni, false, bnd) * nj;
                    let here = row * nj;
                    fn rows(v: &[f64], up: usize, down: usize, here: usize, nj: usize) -> [&[f64]; 3] {
                        [&v[up..up + nj], &v[down..down + nj], &v[here..here + nj]]
                    }
                    let [s_up, s_dn, s_row] = rows(s, up, down, here, nj);
                    let [i_up, i_dn, i_row] = rows(i, up, down, here, nj);
                    let [r_up, r_dn, r_row] = rows(r, up, down, here, nj);
                    let [ks, ki, kr] = k;
                    let mut site = |col: usize, left: usize, right: usize| {
                        let (sv, iv) = (s_row[col], i_row[col]);
                        let lap_s = s_up[col] + s_dn[col] + s_row[left] + s_row[right] - 4.0 * sv;
                        let lap_i = i_up[col] + i_dn[col] + i_row[left] + i_row[right] - 4.0 * iv;
                        let f = p.incidence(sv, iv);
                        ks[col] = p.d1 * lap_s + p.recruitment - f - p.mu1 * sv;
                        ki[col] = p.d2 * lap_i + f - p.mu2 * iv;
                        kr[col] = if with_r {
                            let rv = r_row[col];
                            let lap_r = r_up[col] + r_dn[col] + r_row[left] + r_row[right] - 4.0 * rv;
                            p.d3 * lap_r + p.gamma * iv - p.mu1 * rv
                        } else {
                            0.0
                        };
                    };
                    for col in 1..nj - 1 {
                        site(col, col - 1, col + 1);
                    }
                    for col in [0, nj - 1] {
                        site(col, neighbour(col, nj, false, bnd), neighbour(col, nj, true, bnd));
                    }
                    let fields = [(acc_s, next_s), (acc_i, next_i), (acc_r, next_r)];
                    let mut bad = None;
                    for (field, ((acc, next), k)) in fields.into_iter().zip(k.iter()).enumerate() {
                        let y_row = &y[field][here..here + nj];
                        match fold {
                            Fold::First => {
                                for c in 0..nj {
                                    acc[c] = y_row[c] + a * k[c];
                                    next[c] = y_row[c] + b * k[c];
                                }
                            }
                            Fold::Middle => {
                                for c in 0..nj {
                                    acc[c] += a * k[c];
                                    next[c] = y_row[c] + b * k[c];
                                }
                            }
                            Fold::Last => {
                                for c in 0..nj {
                                    let v = acc[c] + a * k[c];
                                    next[c] = if (-NEG_CLAMP..0.0).contains(&v) { 0.0 } else { v };
                                }
                                if bad.is_none() {
                                    if let Some(c) = next.iter().position(|v| !(*v >= 0.0)) {
                                        bad = Some((field, here + c, next[c]));
                                    }
                                }
                            }
                        }
                    }
                    bad
                },
            )
            .flatten()
            .min_by_key(|(_, n, _)| *n)
    }

    /// One RK4 step; values in [−1e-12, 0) are clamped to zero, anything
    /// lower or non-finite aborts.
    pub fn step(&mut self, st: &mut LatticeState, dt: f64) -> Result<()> {
        assert_eq!((st.ni, st.nj), (self.ni, self.nj), "state shape");
        let mut acc = std::mem::take(&mut self.acc);
        let [mut b0, mut b1] = std::mem::take(&mut self.stage);
        {
            let y: Fields = [&st.s, &st.i, &st.r];
            let [a0, a1, a2] = &mut acc;
            let [s0, s1, s2] = &mut b0;
            self.sweep(y, y, [a0, a1, a2], [s0, s1, s2], dt / 6.0, dt / 2.0, Fold::First);
            let [t0, t1, t2] = &mut b1;
            self.sweep([&b0[0], &b0[1], &b0[2]], y, [a0, a1, a2], [t0, t1, t2], dt / 3.0, dt / 2.0, Fold::Middle);
            let [s0, s1, s2] = &mut b0;
            self.sweep([&b1[0], &b1[1], &b1[2]], y, [a0, a1, a2], [s0, s1, s2], dt / 3.0, dt, Fold::Middle);
        }
        let bad = {
            let [a0, a1, a2] = &mut acc;
            self.sweep(
                [&b0[0], &b0[1], &b0[2]],
                [&b0[0], &b0[1], &b0[2]],
                [a0, a1, a2],
                [&mut st.s, &mut st.i, &mut st.r],
                dt / 6.0,
                0.0,
                Fold::Last,
            )
        };
        self.acc = acc;
        self.stage = [b0, b1];
        st.t += dt;
        if let Some((field, n, v)) = bad {
            return Err(Error::NumericAbort {
                t: st.t,
                reason: format!("{} = {v} at site ({}, {})", ["S", "I", "R"][field], n / st.nj, n % st.nj),
            });
        }
        Ok(())
    }
}

/// One RK4 step of `st` with a fresh integrator.
pub fn step(p: &ModelParams, st: &mut LatticeState, dt: f64, boundary: Boundary) -> Result<()> {
    check_cfl(p, dt, st.max_s())?;
    Integrator::new(p, st.ni, st.nj, boundary, true).step(st, dt)
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontTrace {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub fit: Option<SpeedFit>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub t_final: f64,
    pub steps: usize,
    pub stop_reason: String,
    pub max_i_final: f64,
    pub max_s_final: f64,
    pub front_level: f64,
    pub extinct: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshots: Vec<LatticeState>,
    pub trace: FrontTrace,
    pub summary: RunSummary,
    pub final_state: LatticeState,
}

fn every_steps(interval: f64, dt: f64) -> usize {
    ((interval / dt).round() as usize).max(1)
}

/// Integrates from `init_lattice` to t_end.
pub fn run(p: &ModelParams, cfg: &SimConfig) -> Result<RunOutput> {
    let st = init_lattice(p, cfg)?;
    run_from(p, cfg, st)
}

/// Integrates `state` to cfg.t_end, sampling the front every record_every
/// and stopping early once the front nears the far edge or I goes extinct.
pub fn run_from(p: &ModelParams, cfg: &SimConfig, mut st: LatticeState) -> Result<RunOutput> {
    cfg.validate()?;
    check_cfl(p, cfg.dt, st.max_s())?;
    let theta = p.theta;
    let level = cfg.tracking_level(p);
    let far = st.max_projection(theta) - cfg.edge_margin;
    let mut integ = Integrator::new(p, st.ni, st.nj, cfg.boundary, cfg.integrate_r);
    let total = (cfg.t_end / cfg.dt).round() as usize;
    let rec = every_steps(cfg.record_every, cfg.dt);
    let snap = cfg.snapshot_every.map(|v| every_steps(v, cfg.dt));
    let mut times = Vec::new();
    let mut positions = Vec::new();
    let mut snapshots = Vec::new();
    let mut stop_reason = "horizon".to_string();
    let mut steps = 0;
    if snap.is_some() {
        snapshots.push(st.clone());
    }
    for n in 1..=total {
        integ.step(&mut st, cfg.dt)?;
        steps = n;
        if snap.is_some_and(|m| n % m == 0) {
            snapshots.push(st.clone());
        }
        if let Some(floor) = cfg.extinction_level {
            if st.max_i() < floor {
                stop_reason = "extinct".into();
                break;
            }
        }
        if n % rec == 0 {
            if let Ok(x) = front_position(&st, theta, level) {
                if x > far {
                    stop_reason = "edge".into();
                    break;
                }
                times.push(st.t);
                positions.push(x);
            }
        }
    }
    let (fit, fit_error) = match estimate_speed(&times, &positions, cfg.window_fraction) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let max_i = st.max_i();
    let summary = RunSummary {
        t_final: st.t,
        steps,
        stop_reason,
        max_i_final: max_i,
        max_s_final: st.max_s(),
        front_level: level,
        extinct: max_i < cfg.extinction_level.unwrap_or(1e-8),
    };
    Ok(RunOutput {
        snapshots,
        trace: FrontTrace {
            times,
            positions,
            fit,
            fit_error,
        },
        summary,
        final_state: st,
    })
}

/// Front-like data: I = I*·σ and S = S₀ − (S₀ − S*)·σ with
/// σ = 1/(1 + e^{ξ − ξ₀}), ξ₀ at the `fraction` quantile of projections.
pub fn front_like_state(p: &ModelParams, ni: usize, nj: usize, fraction: f64) -> Result<LatticeState> {
    let (s_star, i_star) = endemic_equilibrium(p)?;
    let mut st = LatticeState::uniform(ni, nj, p.s0(), 0.0, 0.0);
    let (c, s) = (p.cos_theta(), p.sin_theta());
    let mut proj: Vec<f64> = (0..ni)
        .flat_map(|i| (0..nj).map(move |j| i as f64 * c + j as f64 * s))
        .collect();
    let flat = proj.clone();
    proj.sort_by(f64::total_cmp);
    let x0 = proj[((fraction * (proj.len() - 1) as f64).round() as usize).min(proj.len() - 1)];
    for (n, x) in flat.into_iter().enumerate() {
        let sigma = 1.0 / (1.0 + (x - x0).exp());
        st.i[n] = i_star * sigma;
        st.s[n] = p.s0() - (p.s0() - s_star) * sigma;
        st.r[n] = p.gamma * i_star * sigma / p.mu1;
    }
    Ok(st)
}

#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceReport {
    pub c_test: f64,
    pub c_star: f64,
    /// min over λ ≥ 0 of Δ_{c_test}(λ), from the dispersion minimiser.
    pub min_delta: f64,
    /// The smallest Δ_{c_test} over a uniform λ grid on [0, 2λ*+10].
    pub min_delta_grid: f64,
    pub observed_speed: Option<f64>,
    pub r_squared: Option<f64>,
    pub speed_ratio_to_c_star: Option<f64>,
    pub delta_positive: bool,
    pub outruns: bool,
    pub pass: bool,
}

/// Runs front-like initial data and checks that the front outruns the
/// subcritical speed c_test, together with Δ_{c_test} > 0 on λ ≥ 0.
pub fn nonexistence_probe(p: &ModelParams, c_test: f64, cfg: &SimConfig) -> Result<NonexistenceReport> {
    if !(p.r0() > 1.0) {
        return Err(Error::NoEndemicEquilibrium { r0: p.r0() });
    }
    let crit = find_critical(p)?;
    if !(c_test > 0.0 && c_test < crit.c_star) {
        return Err(Error::Domain(format!(
            "probe speed {c_test} must lie in (0, c* = {})",
            crit.c_star
        )));
    }
    let chi = CharacteristicFn::new(p);
    let (_, min_delta) = chi.minimum(c_test)?;
    let top = 2.0 * crit.lambda_star + 10.0;
    let mut min_grid = f64::INFINITY;
    for k in 0..=4000 {
        let lam = top * k as f64 / 4000.0;
        if let Ok(v) = chi.value(c_test, lam) {
            min_grid = min_grid.min(v);
        }
    }
    let fraction = match cfg.init_shape {
        InitShape::HalfPlane { fraction } => fraction,
        InitShape::Disk { .. } => DEFAULT_SEED_FRACTION,
    };
    let st = front_like_state(p, cfg.ni, cfg.nj, fraction)?;
    let out = run_from(p, cfg, st)?;
    let fit = out.trace.fit;
    let speed = fit.as_ref().map(|f| f.speed);
    let delta_positive = min_delta > 0.0 && min_grid > 0.0;
    let outruns = speed.is_some_and(|v| v > c_test);
    Ok(NonexistenceReport {
        c_test,
        c_star: crit.c_star,
        min_delta,
        min_delta_grid: min_grid,
        observed_speed: speed,
        r_squared: fit.as_ref().map(|f| f.r_squared),
        speed_ratio_to_c_star: speed.map(|v| v / crit.c_star),
        delta_positive,
        outruns,
        pass: delta_positive && outruns,
    })
}

#[cfg(test)]
mod tests;
