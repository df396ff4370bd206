//! Front tracking on the projected coordinate ξ = i cosθ + j sinθ and the
//! late-time speed fit.

use serde::Serialize;

use super::LatticeState;
use crate::error::{Error, Result};

/// Bin averages of S and I over unit-width bins of ξ, located at the mean
/// projection of the sites in each bin. Empty bins are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectedBin {
    pub xi: f64,
    pub s: f64,
    pub i: f64,
}

pub fn projected_profile(state: &LatticeState, theta: f64) -> Vec<ProjectedBin> {
    let (cos, sin) = (theta.cos(), theta.sin());
    let proj = |i: usize, j: usize| i as f64 * cos + j as f64 * sin;
    let corners = [
        proj(0, 0),
        proj(state.ni - 1, 0),
        proj(0, state.nj - 1),
        proj(state.ni - 1, state.nj - 1),
    ];
    let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = (hi - lo).floor() as usize + 1;
    let mut sum_s = vec![0.0; bins];
    let mut sum_i = vec![0.0; bins];
    let mut sum_x = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for i in 0..state.ni {
        for j in 0..state.nj {
            let x = proj(i, j);
            let b = ((x - lo).floor() as usize).min(bins - 1);
            let k = state.index(i, j);
            sum_s[b] += state.s[k];
            sum_i[b] += state.i[k];
            sum_x[b] += x;
            count[b] += 1;
        }
    }
    (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let n = count[b] as f64;
            ProjectedBin {
                xi: sum_x[b] / n,
                s: sum_s[b] / n,
                i: sum_i[b] / n,
            }
        })
        .collect()
}

/// Leading-edge crossing of `level` by the bin-averaged infected density.
pub fn front_position(state: &LatticeState, theta: f64, level: f64) -> Result<f64> {
    let profile = projected_profile(state, theta);
    let above = profile.iter().filter(|b| b.i >= level).count();
    if above == 0 || above == profile.len() || profile[profile.len() - 1].i >= level {
        return Err(Error::NoFront);
    }
    let k = profile
        .iter()
        .rposition(|b| b.i >= level)
        .expect("some bin is above the level");
    let (a, b) = (profile[k], profile[k + 1]);
    Ok(a.xi + (a.i - level) / (a.i - b.i) * (b.xi - a.xi))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeedFit {
    pub speed: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

/// Minimum number of samples in the fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares slope of position against time over the last
/// `window_fraction` of the sampled time span.
pub fn estimate_speed(times: &[f64], positions: &[f64], window_fraction: f64) -> Result<SpeedFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    if times.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: times.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let start = t1 - window_fraction * (t1 - t0);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(positions)
        .filter(|(t, _)| **t >= start - 1e-9 * (1.0 + start.abs()))
        .map(|(t, x)| (*t, *x))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: pts.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    let (speed, intercept, r_squared) = crate::profile::linear_fit(&pts);
    if !speed.is_finite() {
        return Err(Error::Domain("degenerate speed fit".into()));
    }
    Ok(SpeedFit {
        speed,
        intercept,
        fit_window: (pts[0].0, pts[pts.len() - 1].0),
        r_squared,
        samples: pts.len(),
    })
}
