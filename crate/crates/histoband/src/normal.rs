//! Standard normal distribution helpers.

use std::f64::consts::SQRT_2;

use libm::{erf, erfc};
use statrs::function::erf::erfc_inv;

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// 1 − Φ(x), without cancellation for large `x`.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// P(|Z| ≤ x) = 2Φ(x) − 1.
pub fn abs_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        erf(x / SQRT_2)
    }
}

/// Upper-tail quantile: the `x` with 1 − Φ(x) = `tail`.
///
/// The starting value is polished by Newton steps on `ln sf`, which keeps
/// the relative accuracy of `tail` deep in the tail.
pub fn isf(tail: f64) -> f64 {
    let mut x = SQRT_2 * erfc_inv(2.0 * tail);
    if !(x.is_finite() && tail > 0.0 && tail < 1.0) {
        return x;
    }
    let ln_tail = tail.ln();
    for _ in 0..3 {
        let s = sf(x);
        if s <= 0.0 {
            break;
        }
        // d/dx ln sf(x) = −φ(x) / sf(x)
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let step = (s.ln() - ln_tail) * s / density;
        x += step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Φ^{-1}(u).
pub fn quantile(u: f64) -> f64 {
    isf(1.0 - u)
}
