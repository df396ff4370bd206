//! Small quadrature helpers shared by the profile and Lyapunov modules.

/// 16-point Gauss–Legendre nodes and weights on [-1, 1].
const GL16: [(f64, f64); 16] = [
    (-0.9894009349916499, 0.027152459411754037),
    (-0.9445750230732326, 0.062253523938647706),
    (-0.8656312023878318, 0.09515851168249259),
    (-0.755404408355003, 0.12462897125553403),
    (-0.6178762444026438, 0.14959598881657676),
    (-0.45801677765722737, 0.16915651939500262),
    (-0.2816035507792589, 0.1826034150449236),
    (-0.09501250983763745, 0.18945061045506859),
    (0.09501250983763745, 0.18945061045506859),
    (0.2816035507792589, 0.1826034150449236),
    (0.45801677765722737, 0.16915651939500262),
    (0.6178762444026438, 0.14959598881657676),
    (0.755404408355003, 0.12462897125553403),
    (0.8656312023878318, 0.09515851168249259),
    (0.9445750230732326, 0.062253523938647706),
    (0.9894009349916499, 0.027152459411754037),
];

/// ∫_a^b f by 16-point Gauss–Legendre.
pub fn gauss_legendre_16<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL16.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Composite trapezoid rule for samples on a uniform grid of spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Weights `(w_left, w_right)` such that
/// ∫_0^h e^{-k(h-t)} [a (1 - t/h) + b t/h] dt = w_left·a + w_right·b,
/// the exact integral of the exponential kernel against a linear interpolant.
pub fn exp_kernel_panel_weights(k: f64, h: f64) -> (f64, f64) {
    let kh = k * h;
    if kh.abs() < 1e-6 {
        // Series to avoid cancellation: w0 = h(1 - kh/2 + (kh)^2/6), w1 = h(1/2 - kh/6 + (kh)^2/24).
        let w0 = h * (1.0 - kh / 2.0 + kh * kh / 6.0);
        let w1 = h * (0.5 - kh / 6.0 + kh * kh / 24.0);
        return (w0 - w1, w1);
    }
    let e = (-kh).exp();
    let w0 = -(-kh).exp_m1() / k;
    let w1 = w0 - (1.0 - e * (1.0 + kh)) / (k * kh);
    (w0 - w1, w1)
}
