//! Thin wrappers over the `quadrature` crate with explicit convergence checks.

use quadrature::double_exponential;

use crate::error::{Error, Result};

/// Integrate `f` over `[a, b]` to relative accuracy `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rough = double_exponential::integrate(&f, a, b, 1e-6);
    let scale = rough.integral.abs().max(f64::MIN_POSITIVE);
    let target = (rel_tol * scale).max(1e-300);
    let out = double_exponential::integrate(&f, a, b, target);
    if !out.integral.is_finite() {
        return Err(Error::Numerical(format!("quadrature on [{a}, {b}] produced {}", out.integral)));
    }
    if out.error_estimate > 10.0 * target && out.error_estimate > 1e-14 * scale {
        return Err(Error::Numerical(format!(
            "quadrature on [{a}, {b}] reached error {:.3e}, wanted {:.3e}",
            out.error_estimate, target
        )));
    }
    Ok(out.integral)
}

/// Integrate `f` over `[a, b]` to absolute accuracy `abs_tol`, for integrals
/// that may legitimately vanish.
pub fn integrate_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let out = double_exponential::integrate(&f, a, b, abs_tol);
    if !out.integral.is_finite() {
        return Err(Error::Numerical(format!("quadrature on [{a}, {b}] produced {}", out.integral)));
    }
    if out.error_estimate > 10.0 * abs_tol {
        return Err(Error::Numerical(format!(
            "quadrature on [{a}, {b}] reached error {:.3e}, wanted {:.3e}",
            out.error_estimate, abs_tol
        )));
    }
    Ok(out.integral)
}

/// Sine integral Si(x) = int_0^x sin(t)/t dt.
pub fn sine_integral(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x < 0.0 {
        return -sine_integral(-x);
    }
    if x <= 6.0 {
        // Taylor series; terms alternate and the tail is below 1e-17 by n = 25
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for n in 1..40 {
            let k = 2 * n;
            term *= -x2 / ((k as f64) * (k as f64 + 1.0));
            let add = term / (k as f64 + 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    // split at multiples of pi so each piece is single-signed
    let sinc = |t: f64| t.sin() / t;
    let mut total = sine_integral(6.0);
    let mut lo = 6.0;
    while lo < x {
        let hi = (lo + std::f64::consts::PI).min(x);
        total += double_exponential::integrate(sinc, lo, hi, 1e-15).integral;
        lo = hi;
    }
    total
}

/// (1/x) Si(x), continuous at x = 0.
pub fn sinc_average(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 18.0
    } else {
        sine_integral(x) / x
    }
}
