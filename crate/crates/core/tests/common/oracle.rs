//! Independent references for the magnitude-integrated likelihood.

use std::f64::consts::PI;

/// Log of the integrand `N(o - r d; σ²I) · (λ/g) e^{-λ r / g}`, written
/// directly from the vector geometry rather than the completed square.
fn log_integrand(m: f64, dtheta: f64, g: f64, var: f64, rate: f64, r: f64) -> f64 {
    let (ox, oy) = (m * dtheta.cos(), m * dtheta.sin());
    let (nx, ny) = (ox - r, oy);
    -(nx * nx + ny * ny) / (2.0 * var) - (2.0 * PI * var).ln() + (rate / g).ln() - rate * r / g
}

/// Midpoint-rule sum with `steps` samples over a window that contains every
/// part of the integrand within `e^-60` of its peak.
pub fn riemann_log_likelihood(m: f64, dtheta: f64, g: f64, var: f64, rate: f64, steps: usize) -> f64 {
    let sigma = var.sqrt();
    let mu = m * dtheta.cos() - var * rate / g;
    let reach2 = 120.0 * var;
    let (lo, hi) = if mu >= 0.0 {
        ((mu - reach2.sqrt()).max(0.0), mu + reach2.sqrt())
    } else {
        (0.0, reach2 / ((mu * mu + reach2).sqrt() - mu))
    };
    assert!(hi > lo && sigma > 0.0);
    let h = (hi - lo) / steps as f64;
    let peak = log_integrand(m, dtheta, g, var, rate, mu.max(lo));
    let mut acc = 0.0;
    for i in 0..steps {
        let r = lo + h * (i as f64 + 0.5);
        acc += (log_integrand(m, dtheta, g, var, rate, r) - peak).exp();
    }
    peak + (acc * h).ln()
}

/// `ln erfc(x)` that stays accurate where `erfc` underflows.
fn ln_erfc(x: f64) -> f64 {
    if x < 20.0 {
        statrs::function::erf::erfc(x).ln()
    } else {
        // Asymptotic expansion of the scaled complementary error function.
        let inv2 = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..8 {
            term *= -((2 * k - 1) as f64) * inv2;
            sum += term;
        }
        -x * x + (sum / (x * PI.sqrt())).ln()
    }
}

/// Exact value of the integral over `[0, ∞)` via the complementary error function.
pub fn closed_form_log_likelihood(m: f64, dtheta: f64, g: f64, var: f64, rate: f64) -> f64 {
    let sigma = var.sqrt();
    let mu = m * dtheta.cos() - var * rate / g;
    let x = -mu / (sigma * 2f64.sqrt());
    -(2.0 * PI * var).ln() + (rate / g).ln() + (mu * mu - m * m) / (2.0 * var)
        + (sigma * (PI / 2.0).sqrt()).ln()
        + ln_erfc(x)
}

/// Relative error of log-likelihood values, floored at one nat so that it
/// stays meaningful where the log value crosses zero.
pub fn log_value_error(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}
