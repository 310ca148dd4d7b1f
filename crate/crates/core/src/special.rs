//! Special functions not covered by std: modified Bessel K0 and log-factorials.

/// e^x K0(x) for x > 0.
///
/// Uses K0(x) = ∫₀^∞ exp(−x cosh t) dt. The integrand is analytic in a strip
/// around the real axis and decays double-exponentially, so the plain
/// trapezoid rule converges geometrically in the step size.
pub fn bessel_k0_scaled(x: f64) -> f64 {
    assert!(x > 0.0, "K0 requires a positive argument");
    // The peak at t = 0 has width ~1/sqrt(x); keep several samples across it.
    let h: f64 = 0.05_f64.min(0.25 / x.sqrt());
    let mut sum = 0.5; // t = 0 term: exp(−x (cosh 0 − 1)) = 1, halved.
    let mut t: f64 = h;
    loop {
        // cosh t − 1 = 2 sinh²(t/2) avoids cancellation near t = 0.
        let s = (0.5 * t).sinh();
        let term = (-2.0 * x * s * s).exp();
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        t += h;
    }
    sum * h
}

/// Modified Bessel function of the second kind, order zero.
pub fn bessel_k0(x: f64) -> f64 {
    bessel_k0_scaled(x) * (-x).exp()
}

/// K0(x)·sinh(x) evaluated without overflow for large x.
pub fn k0_sinh(x: f64) -> f64 {
    // sinh(x) e^{−x} = (1 − e^{−2x}) / 2
    bessel_k0_scaled(x) * 0.5 * (-(-2.0 * x).exp_m1())
}

/// ln(n!) table for 0..=n_max.
pub fn ln_factorials(n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n_max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}
