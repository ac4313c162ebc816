//! Log-domain special functions.
//!
//! The Whittaker function is evaluated from the integral representation of
//! the confluent hypergeometric function of the second kind,
//!
//! ```text
//! W_{κ,μ}(z) = z^{μ+1/2} e^{-z/2} U(μ-κ+1/2, 1+2μ, z),
//! U(a, b, z) = Γ(a)^{-1} ∫₀^∞ e^{-zs} s^{a-1} (1+s)^{b-a-1} ds,   a > 0,
//! ```
//!
//! using the symmetry `W_{κ,μ} = W_{κ,-μ}` to pick the sign of `μ` that
//! gives the larger `a`. The integral is computed in log space over
//! `y = ln s` by [`crate::quadrature::integrate_log`].

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_log, Domain};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

/// Relative tolerance for the U integral.
const W_REL_TOL: f64 = 1e-12;

// B_{2k} / (2k (2k-1)) for k = 1..8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// `log Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_infinite() {
        return Err(Error::domain(format!("log_gamma needs a finite x > 0, got {x}")));
    }
    if x == 1.0 || x == 2.0 {
        return Ok(0.0);
    }
    let mut z = x;
    let mut prod = 1.0;
    while z < 15.0 {
        prod *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in STIRLING {
        series += c * pow;
        pow *= inv2;
    }
    let stirling = (z - 0.5) * z.ln() - z + LN_SQRT_2PI + series;
    Ok(stirling - prod.ln())
}

/// `log B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("log_beta needs a, b > 0, got ({a}, {b})")));
    }
    Ok(log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?)
}

/// Arguments of `W_{κ,μ}(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhittakerArgs {
    pub kappa: f64,
    pub mu: f64,
    pub z: f64,
}

impl WhittakerArgs {
    pub fn new(kappa: f64, mu: f64, z: f64) -> Self {
        WhittakerArgs { kappa, mu, z }
    }
}

/// `log W_{κ,μ}(z)` for real `z > 0`.
///
/// Supported whenever `1/2 + |μ| - κ` is positive, or exactly zero (where
/// `U ≡ 1`). Other parameters yield [`Error::UnsupportedRegime`].
pub fn whittaker_w_log(args: WhittakerArgs) -> Result<f64> {
    Ok(whittaker_w_log_scaled(args)? - 0.5 * args.z)
}

/// `log(e^{z/2} W_{κ,μ}(z))`. Differences of these at a common `z` keep full
/// precision when `z` is large.
pub fn whittaker_w_log_scaled(args: WhittakerArgs) -> Result<f64> {
    let WhittakerArgs { kappa, mu, z } = args;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("Whittaker W needs a finite z > 0, got {z}")));
    }
    if !kappa.is_finite() || !mu.is_finite() {
        return Err(Error::domain("Whittaker indices must be finite"));
    }
    let m = mu.abs();
    let a = 0.5 + m - kappa;
    let prefix = (m + 0.5) * z.ln();
    if a == 0.0 {
        return Ok(prefix);
    }
    if !(a > 0.0) {
        return Err(Error::regime(format!(
            "U-integral representation diverges for kappa = {kappa}, mu = {mu} (a = {a})"
        )));
    }
    let c = m + kappa - 0.5;
    // With s = e^y the integrand becomes exp(-z e^y + a y + c ln(1 + e^y)):
    // the s^{a-1} endpoint singularity disappears and the slowly decaying
    // tail of small z turns into a plateau of finite length.
    let b = z - a - c;
    let sq = (b * b + 4.0 * z * a).sqrt();
    let s_star = if b > 0.0 { 2.0 * a / (b + sq) } else { (sq - b) / (2.0 * z) };
    let hint = s_star.ln();
    let log_j = integrate_log(
        |y: f64| {
            let softplus = if y > 0.0 { y + (-y).exp().ln_1p() } else { y.exp().ln_1p() };
            -z * y.exp() + a * y + c * softplus
        },
        Domain::Real,
        hint.is_finite().then_some(hint),
        W_REL_TOL,
    )?
    .log_value;
    Ok(prefix - log_gamma(a)? + log_j)
}

/// `log ∫₀¹ θ^{ν-1} (1-θ)^{μ-1} e^{-λ/θ} dθ` through its Whittaker closed form
/// `λ^{(ν-1)/2} e^{-λ/2} Γ(μ) W_{(1-2μ-ν)/2, ν/2}(λ)`.
pub fn log_tilted_beta_integral(nu: f64, mu: f64, lambda: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::regime(format!("needs mu > 0 for a finite integral, got {mu}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("needs lambda > 0, got {lambda}")));
    }
    let w = whittaker_w_log(WhittakerArgs::new(0.5 * (1.0 - 2.0 * mu - nu), 0.5 * nu, lambda))?;
    Ok(0.5 * (nu - 1.0) * lambda.ln() - 0.5 * lambda + log_gamma(mu)? + w)
}

/// `log Γ(1/2)`, used by tests and self-checks.
pub fn log_sqrt_pi() -> f64 {
    0.5 * PI.ln()
}
