use super::*;
use crate::model::Equilibria;
use proptest::prelude::{any, prop, prop_assert, proptest, ProptestConfig};
use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

fn small(ni: usize, nj: usize) -> SimConfig {
    SimConfig {
        ni,
        nj,
        ..SimConfig::default()
    }
}

fn stepper(p: &ModelParams, st: &LatticeState, integrate_r: bool) -> Integrator {
    Integrator::new(p, st.ni, st.nj, Boundary::Copy, integrate_r)
}

fn advance(p: &ModelParams, st: &mut LatticeState, dt: f64, steps: usize) {
    let mut integ = stepper(p, st, true);
    for _ in 0..steps {
        integ.step(st, dt).unwrap();
    }
}

fn site_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.05..1.5)).collect()
}

/// Scalar classical RK4 for one site without coupling.
fn scalar_rk4(p: &ModelParams, y: [f64; 3], dt: f64, steps: usize) -> [f64; 3] {
    let f = |y: [f64; 3]| {
        let inc = p.beta * y[0] * y[1] / (1.0 + p.alpha * y[1]);
        [
            p.recruitment - inc - p.mu1 * y[0],
            inc - p.mu2 * y[1],
            p.gamma * y[1] - p.mu1 * y[2],
        ]
    };
    let mut y = y;
    for _ in 0..steps {
        let add = |a: [f64; 3], k: [f64; 3], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]];
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

#[test]
fn empty_seed_is_rejected() {
    let p = ModelParams::standard();
    let cfg = SimConfig {
        init_shape: InitShape::Disk { radius: 0.0 },
        ..small(20, 20)
    };
    assert!(matches!(init_lattice(&p, &cfg), Err(Error::InvalidConfig(_))));
    let cfg = SimConfig {
        init_shape: InitShape::HalfPlane { fraction: 0.0 },
        ..small(20, 20)
    };
    assert!(init_lattice(&p, &cfg).is_err());
}

#[test]
fn half_plane_seed_covers_requested_fraction() {
    let p = ModelParams::standard();
    let eq = Equilibria::new(&p).unwrap();
    let cfg = SimConfig {
        init_shape: InitShape::HalfPlane { fraction: 0.3 },
        ..small(200, 200)
    };
    let st = init_lattice(&p, &cfg).unwrap();
    let seeded = st.i.iter().filter(|&&v| v > 0.0).count() as f64 / st.i.len() as f64;
    assert!((seeded - 0.3).abs() < 0.01, "{seeded}");
    assert!(st.i.iter().all(|&v| v == 0.0 || v == eq.i_star));
    assert!(st.s.iter().all(|&v| v == p.s0()) && st.r.iter().all(|&v| v == 0.0));
    // the seed is the low-projection side
    let corner = st.i[st.index(0, 0)];
    let far = st.i[st.index(199, 199)];
    assert!(corner > 0.0 && far == 0.0);
}

#[test]
fn jitter_is_reproducible_and_bounded() {
    let p = ModelParams::standard();
    let cfg = SimConfig {
        jitter: 0.2,
        seed: 9,
        init_level: Some(0.1),
        ..small(30, 30)
    };
    let a = init_lattice(&p, &cfg).unwrap();
    let b = init_lattice(&p, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.i.iter().all(|&v| v == 0.0 || (0.08..=0.12).contains(&v)));
    assert!(a.i.iter().any(|&v| v > 0.0 && v != 0.1));
}

#[test]
fn disease_free_relaxation_follows_exponential_law() {
    let p = ModelParams::standard();
    let mut st = LatticeState::uniform(6, 6, 0.0, 0.0, 0.0);
    st.s = vec![0.3; 36];
    let dt = 1e-3;
    advance(&p, &mut st, dt, 1000);
    let exact = p.s0() + (0.3 - p.s0()) * (-p.mu1 * st.t).exp();
    for v in &st.s {
        assert!((v - exact).abs() < 1e-6);
    }
    assert!(st.i.iter().all(|&v| v == 0.0));
}

#[test]
fn endemic_state_is_stationary() {
    let p = ModelParams::standard();
    let eq = Equilibria::new(&p).unwrap();
    let r_star = p.gamma * eq.i_star / p.mu1;
    let start = LatticeState::uniform(12, 12, eq.s_star, eq.i_star, r_star);
    let mut st = start.clone();
    advance(&p, &mut st, 0.05, 20);
    let drift = st
        .s
        .iter()
        .zip(&start.s)
        .chain(st.i.iter().zip(&start.i))
        .chain(st.r.iter().zip(&start.r))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(drift / st.t < 1e-10, "{drift}");
}

#[test]
fn zero_diffusion_sites_follow_scalar_oracle() {
    let p = ModelParams {
        d1: 0.0,
        d2: 0.0,
        d3: 0.0,
        ..ModelParams::standard()
    };
    let mut st = LatticeState::uniform(7, 5, 0.0, 0.0, 0.0);
    st.s = site_values(35, 1);
    st.i = site_values(35, 2);
    st.r = site_values(35, 3);
    let start = st.clone();
    let (dt, steps) = (0.02, 250);
    advance(&p, &mut st, dt, steps);
    for n in 0..35 {
        let y = scalar_rk4(&p, [start.s[n], start.i[n], start.r[n]], dt, steps);
        assert!((st.s[n] - y[0]).abs() < 1e-8);
        assert!((st.i[n] - y[1]).abs() < 1e-8);
        assert!((st.r[n] - y[2]).abs() < 1e-8);
    }
}

#[test]
fn time_stepping_is_fourth_order() {
    let p = ModelParams::standard();
    let mut base = LatticeState::uniform(10, 10, 0.0, 0.0, 0.0);
    base.s = site_values(100, 4);
    base.i = site_values(100, 5);
    base.r = site_values(100, 6);
    let solve = |dt: f64| {
        let mut st = base.clone();
        advance(&p, &mut st, dt, (1.0 / dt).round() as usize);
        st
    };
    let dt = 0.05;
    let reference = solve(dt / 8.0);
    let err = |st: &LatticeState| {
        st.s.iter()
            .zip(&reference.s)
            .chain(st.i.iter().zip(&reference.i))
            .chain(st.r.iter().zip(&reference.r))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let ratio = err(&solve(dt)) / err(&solve(dt / 2.0));
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn recovered_class_does_not_feed_back() {
    let p = ModelParams::standard();
    let cfg = small(40, 30);
    let start = init_lattice(&p, &cfg).unwrap();
    let (mut a, mut b) = (start.clone(), start);
    let mut with_r = stepper(&p, &a, true);
    let mut without_r = stepper(&p, &b, false);
    for _ in 0..100 {
        with_r.step(&mut a, 0.05).unwrap();
        without_r.step(&mut b, 0.05).unwrap();
    }
    assert!(a.s.iter().zip(&b.s).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a.i.iter().zip(&b.i).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a.r.iter().any(|&v| v > 0.0) && b.r.iter().all(|&v| v == 0.0));
}

#[test]
fn negative_values_abort_and_tiny_ones_clamp() {
    let p = ModelParams {
        d1: 0.0,
        d2: 0.0,
        d3: 0.0,
        ..ModelParams::standard()
    };
    let mut st = LatticeState::uniform(4, 4, 1.0, 0.1, 0.0);
    st.i[5] = -0.5;
    let err = stepper(&p, &st, true).step(&mut st, 0.01).unwrap_err();
    match err {
        Error::NumericAbort { reason, .. } => assert!(reason.contains("(1, 1)"), "{reason}"),
        other => panic!("{other:?}"),
    }
    let mut st = LatticeState::uniform(4, 4, 1.0, 0.0, 0.0);
    st.i[3] = -1e-13;
    stepper(&p, &st, true).step(&mut st, 0.01).unwrap();
    assert_eq!(st.i[3], 0.0);
}

#[test]
fn step_guard_rejects_large_dt() {
    let p = ModelParams::standard();
    let mut st = LatticeState::uniform(5, 5, 1.0, 0.1, 0.0);
    assert!(matches!(step(&p, &mut st, 0.2, Boundary::Copy), Err(Error::InvalidConfig(_))));
    assert!(step(&p, &mut st, 0.05, Boundary::Periodic).is_ok());
    let cfg = SimConfig { dt: 0.0, ..small(10, 10) };
    assert!(cfg.validate().is_err());
}

#[test]
fn single_site_spike_stays_nonnegative_and_bounded() {
    let p = ModelParams::standard();
    for boundary in [Boundary::Copy, Boundary::Periodic] {
        let mut st = LatticeState::uniform(15, 15, p.s0(), 0.0, 0.0);
        let k = st.index(7, 7);
        st.i[k] = 0.9;
        let mut integ = Integrator::new(&p, 15, 15, boundary, true);
        let cap = p.s0() + p.recruitment * 0.05;
        for _ in 0..400 {
            integ.step(&mut st, 0.05).unwrap();
            assert!(st.s.iter().chain(&st.i).chain(&st.r).all(|&v| v >= 0.0 && v.is_finite()));
            assert!(st.max_s() <= cap);
        }
    }
}

#[test]
fn periodic_boundary_wraps() {
    let p = ModelParams {
        d1: 1.0,
        beta: 0.0,
        ..ModelParams::standard()
    };
    let mut st = LatticeState::uniform(5, 5, 0.0, 0.0, 0.0);
    let corner = st.index(0, 0);
    st.s[corner] = 1.0;
    let integ = Integrator::new(&p, 5, 5, Boundary::Periodic, true);
    let mut out = [vec![0.0; 25], vec![0.0; 25], vec![0.0; 25]];
    let [a, b, c] = &mut out;
    integ.rhs([&st.s, &st.i, &st.r], [a, b, c]);
    // the wrapped neighbours receive diffusive flux
    for (i, j) in [(4, 0), (0, 4), (1, 0), (0, 1)] {
        assert!((out[0][st.index(i, j)] - (p.d1 + p.recruitment)).abs() < 1e-15);
    }
    let copy = Integrator::new(&p, 5, 5, Boundary::Copy, true);
    let [a, b, c] = &mut out;
    copy.rhs([&st.s, &st.i, &st.r], [a, b, c]);
    assert_eq!(out[0][st.index(4, 0)], p.recruitment);
}

fn step_profile(ni: usize, nj: usize, theta: f64, at: f64) -> LatticeState {
    let mut st = LatticeState::uniform(ni, nj, 1.0, 0.0, 0.0);
    for i in 0..ni {
        for j in 0..nj {
            if (i as f64) * theta.cos() + (j as f64) * theta.sin() < at {
                let k = st.index(i, j);
                st.i[k] = 1.0;
            }
        }
    }
    st
}

#[test]
fn front_of_a_step_is_located_within_a_bin() {
    for theta in [0.0, FRAC_PI_6, FRAC_PI_4] {
        let st = step_profile(60, 60, theta, 17.25);
        let x = front_position(&st, theta, 0.5).unwrap();
        assert!((x - 17.25).abs() <= 0.5, "theta {theta}: {x}");
    }
}

#[test]
fn front_needs_a_crossing() {
    let st = LatticeState::uniform(10, 10, 1.0, 0.7, 0.0);
    assert!(matches!(front_position(&st, FRAC_PI_4, 0.5), Err(Error::NoFront)));
    assert!(matches!(front_position(&st, FRAC_PI_4, 0.9), Err(Error::NoFront)));
}

#[test]
fn front_is_translation_equivariant() {
    let shape = |shift: f64| {
        let mut st = LatticeState::uniform(80, 20, 1.0, 0.0, 0.0);
        for i in 0..80 {
            for j in 0..20 {
                let k = st.index(i, j);
                st.i[k] = 0.5 * (1.0 - (0.7 * (i as f64 - 30.0 - shift)).tanh());
            }
        }
        st
    };
    let a = front_position(&shape(0.0), 0.0, 0.25).unwrap();
    let b = front_position(&shape(3.0), 0.0, 0.25).unwrap();
    assert!((b - a - 3.0).abs() < 1e-12);
    let diag = |di: usize| {
        let mut st = LatticeState::uniform(80, 80, 1.0, 0.0, 0.0);
        for i in 0..80 {
            for j in 0..80 {
                let x = (i + j) as f64 * FRAC_PI_4.cos() - (2 * di) as f64 * FRAC_PI_4.cos();
                let k = st.index(i, j);
                st.i[k] = 0.5 * (1.0 - (0.5 * (x - 40.0)).tanh());
            }
        }
        st
    };
    let a = front_position(&diag(0), FRAC_PI_4, 0.25).unwrap();
    let b = front_position(&diag(2), FRAC_PI_4, 0.25).unwrap();
    let shift = 4.0 * FRAC_PI_4.cos();
    assert!((b - a - shift).abs() < 0.1, "{}", b - a);
}

#[test]
fn speed_fit_on_exact_line() {
    let times: Vec<f64> = (0..40).map(|k| 0.5 * k as f64).collect();
    let pos: Vec<f64> = times.iter().map(|t| 3.0 * t + 1.0).collect();
    let fit = estimate_speed(&times, &pos, 0.5).unwrap();
    assert!((fit.speed - 3.0).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!(fit.samples >= 20 && fit.fit_window.1 == 19.5);
    assert!(matches!(
        estimate_speed(&times[..8], &pos[..8], 0.5),
        Err(Error::InsufficientSamples { got: 8, need: 10 })
    ));
    assert!(matches!(
        estimate_speed(&times[..15], &pos[..15], 0.5),
        Err(Error::InsufficientSamples { got: 8, .. })
    ));
}

#[test]
fn axial_front_advances_at_critical_speed() {
    let p = ModelParams {
        theta: 0.0,
        ..ModelParams::standard()
    };
    let c_star = find_critical(&p).unwrap().c_star;
    let cfg = SimConfig {
        ni: 220,
        nj: 4,
        t_end: 60.0,
        init_shape: InitShape::HalfPlane { fraction: 0.1 },
        ..SimConfig::default()
    };
    let out = run(&p, &cfg).unwrap();
    let fit = out.trace.fit.expect("speed fit");
    assert!((fit.speed - c_star).abs() < 0.1 * c_star, "{} vs {c_star}", fit.speed);
    assert!(fit.r_squared > 0.995);
    let late: Vec<f64> = out
        .trace
        .times
        .iter()
        .zip(&out.trace.positions)
        .filter(|(t, _)| **t > 5.0)
        .map(|(_, x)| *x)
        .collect();
    assert!(late.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn run_stops_near_far_edge() {
    let p = ModelParams {
        theta: 0.0,
        ..ModelParams::standard()
    };
    let cfg = SimConfig {
        ni: 60,
        nj: 3,
        t_end: 80.0,
        init_shape: InitShape::HalfPlane { fraction: 0.2 },
        ..SimConfig::default()
    };
    let out = run(&p, &cfg).unwrap();
    assert_eq!(out.summary.stop_reason, "edge");
    assert!(out.summary.t_final < 80.0);
    assert!(out.trace.positions.iter().all(|&x| x <= 59.0 - cfg.edge_margin));
}

#[test]
fn subthreshold_infection_dies_out() {
    let p = ModelParams {
        beta: 0.5,
        ..ModelParams::standard()
    };
    assert!(p.r0() < 1.0);
    let cfg = SimConfig {
        t_end: 80.0,
        extinction_level: Some(1e-8),
        ..small(40, 40)
    };
    let out = run(&p, &cfg).unwrap();
    assert!(out.summary.extinct && out.summary.stop_reason == "extinct");
    assert!(out.final_state.max_i() < 1e-8);
    assert!(out.trace.fit.is_none());
    assert!(out.trace.fit_error.unwrap().contains("insufficient"));
}

#[test]
fn runs_are_deterministic_and_snapshots_round_trip() {
    let p = ModelParams::standard();
    let cfg = SimConfig {
        t_end: 2.0,
        snapshot_every: Some(1.0),
        jitter: 0.1,
        seed: 3,
        edge_margin: 1.0,
        ..small(24, 18)
    };
    let a = run(&p, &cfg).unwrap();
    let b = run(&p, &cfg).unwrap();
    assert_eq!(a.summary.stop_reason, "horizon");
    assert_eq!(a.snapshots.len(), 3);
    assert_eq!(a.snapshots, b.snapshots);
    let bytes = a.final_state.to_le_bytes();
    assert_eq!(bytes.len(), 24 + 24 * 24 * 18);
    assert_eq!(&bytes[..8], &24u64.to_le_bytes());
    assert_eq!(&bytes[8..16], &18u64.to_le_bytes());
    assert_eq!(&bytes[16..24], &a.final_state.t.to_le_bytes());
    let back = LatticeState::from_le_bytes(&bytes).unwrap();
    assert_eq!(back, a.final_state);
    assert!(LatticeState::from_le_bytes(&bytes[..100]).is_err());
}

#[test]
fn probe_preconditions_and_dispersion_sign() {
    let p = ModelParams::standard();
    let c_star = find_critical(&p).unwrap().c_star;
    let cfg = small(20, 20);
    assert!(nonexistence_probe(&p, c_star, &cfg).is_err());
    assert!(nonexistence_probe(&p, 1.2 * c_star, &cfg).is_err());
    let low = ModelParams {
        beta: 0.5,
        ..ModelParams::standard()
    };
    assert!(nonexistence_probe(&low, 0.5, &cfg).is_err());
    let axial = ModelParams {
        theta: 0.0,
        ..ModelParams::standard()
    };
    let c_axial = find_critical(&axial).unwrap().c_star;
    let cfg = SimConfig {
        ni: 200,
        nj: 3,
        t_end: 40.0,
        init_shape: InitShape::HalfPlane { fraction: 0.1 },
        ..SimConfig::default()
    };
    let rep = nonexistence_probe(&axial, 0.5 * c_axial, &cfg).unwrap();
    assert!(rep.delta_positive && rep.min_delta > 0.0 && rep.min_delta_grid >= rep.min_delta - 1e-12);
    assert!(rep.outruns && rep.pass, "{rep:?}");
    assert!(rep.observed_speed.unwrap() >= 0.9 * c_axial);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn steps_preserve_nonnegativity(
        s in prop::collection::vec(0.0f64..2.0, 64),
        i in prop::collection::vec(0.0f64..1.0, 64),
        zeros in prop::collection::vec(any::<bool>(), 64),
    ) {
        let p = ModelParams::standard();
        let mut st = LatticeState::uniform(8, 8, 0.0, 0.0, 0.0);
        st.s = s;
        st.i = i.iter().zip(&zeros).map(|(v, z)| if *z { 0.0 } else { *v }).collect();
        let mut integ = stepper(&p, &st, true);
        for _ in 0..40 {
            integ.step(&mut st, 0.05).unwrap();
            prop_assert!(st.s.iter().chain(&st.i).chain(&st.r).all(|&v| v >= 0.0));
        }
    }
}
