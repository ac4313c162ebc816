//! Variance of a zero-mean Gaussian with a Beta prior.
//!
//! `x ~ N(0, θ I_N)` with `θ ~ Beta(a, a)`. Everything depends on the data
//! through `t = xᵀx / 2` (equivalently `γ = xᵀx / N = 2t / N`). Posterior
//! moments have closed forms as ratios of Whittaker functions
//! `W_{ξ, μ₀}(t)` with `ξ = (N − 6a + 2)/4` and `μ₀ = (2a − N)/4`.

use std::cell::RefCell;

use crate::engine::{self, XExpectation, INNER_TOL};
use crate::error::{Error, Result};
use crate::model::{JointModel, XSampler};
use crate::quadrature::{
    gauss_legendre, integrate_log, integrate_log_weighted, integrate_weighted_t_log, locate_log_peak, Domain,
};
use crate::special::{log_beta, log_gamma, whittaker_w_log_scaled, WhittakerArgs};

/// Relative tolerance of the outer t-integrals.
pub const T_REL_TOL: f64 = 1e-10;

/// Tolerance of the closed-form MMSE integral. Its integrand is a
/// difference of posterior moments whose relative size is about `2/N`, so it
/// cannot be resolved as finely as the other t-integrals.
pub const MMSE_CLOSED_TOL: f64 = 1e-7;

/// Largest relative gap between the Whittaker-ratio MMSE estimate and its
/// quadrature check before the quadrature value is used.
pub const MMSE_CHECK_TOL: f64 = 1e-4;

/// Shape `a` of the Beta prior and sample count `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseParams {
    a: f64,
    n: u32,
}

impl CaseParams {
    /// Parameters valid for every computation, bounds included (`a > 2`).
    pub fn new(a: f64, n: u32) -> Result<Self> {
        if !(a > 2.0) || !a.is_finite() {
            return Err(Error::regime(format!("bounds need a > 2, got a = {a}")));
        }
        Self::for_estimators(a, n)
    }

    /// Parameters for densities and estimators only (`a > 0`). Bound methods
    /// still reject `a <= 2`.
    pub fn for_estimators(a: f64, n: u32) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::domain(format!("shape a must be positive, got {a}")));
        }
        if n == 0 {
            return Err(Error::domain("N must be at least 1"));
        }
        Ok(CaseParams { a, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    pub fn prior_mean(&self) -> f64 {
        0.5
    }

    /// `σ_π² = 1 / (4 (2a + 1))`.
    pub fn prior_var(&self) -> f64 {
        1.0 / (4.0 * (2.0 * self.a + 1.0))
    }

    /// First Whittaker index `ξ = (N − 6a + 2)/4`.
    pub fn xi(&self) -> f64 {
        (self.nf() - 6.0 * self.a + 2.0) / 4.0
    }

    /// Second Whittaker index `μ₀ = (2a − N)/4`.
    pub fn mu0(&self) -> f64 {
        (2.0 * self.a - self.nf()) / 4.0
    }

    fn require_bounds(&self) -> Result<()> {
        if self.a > 2.0 {
            Ok(())
        } else {
            Err(Error::regime(format!("bounds need a > 2, got a = {}", self.a)))
        }
    }
}

/// The sufficient statistic in both parametrizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuffStat {
    pub t: f64,
    pub gamma: f64,
}

impl SuffStat {
    pub fn from_t(t: f64, n: u32) -> Self {
        SuffStat {
            t,
            gamma: 2.0 * t / f64::from(n),
        }
    }

    pub fn from_x(x: &[f64]) -> Self {
        let t = 0.5 * x.iter().map(|v| v * v).sum::<f64>();
        SuffStat {
            t,
            gamma: 2.0 * t / x.len() as f64,
        }
    }
}

/// Coefficients of the MAP stationarity equation `α θ² − β θ + γ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MapCoefficients {
    pub fn new(p: &CaseParams, gamma: f64) -> Self {
        let n = p.nf();
        MapCoefficients {
            alpha: 1.0 - 4.0 * (p.a - 1.0) / n,
            beta: 1.0 - 2.0 * (p.a - 1.0) / n + gamma,
            gamma,
        }
    }
}

/// Posterior expectations with Whittaker closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    Theta,
    Theta2,
    InvTheta2,
    InvTheta3,
    InvOneMinusTheta2,
}

/// How a bound or the MMSE is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// t-quadrature of the Whittaker closed-form integrand.
    ClosedForm,
    /// Through the bounds engine (`E_x[1/F_x]` with `φ^CR`).
    Engine,
    /// Nested quadrature of posterior moments.
    Quadrature,
}

/// A computed value and its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub value: f64,
    pub err_est: f64,
}

/// Large-sample posterior approximations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticForm {
    /// `∝ exp[(N/2)(ln(γ/θ) − γ/θ)]`.
    Prop3,
    /// Gaussian with mean `γ` and variance `(2/N) γ²`.
    Prop4,
}

/// The outcome of the checked MMSE estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmseEstimate {
    pub value: f64,
    /// Whether the quadrature value replaced the Whittaker ratio.
    pub used_fallback: bool,
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::domain(format!("theta must lie in [0, 1], got {theta}")))
    }
}

fn check_t(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("t must be finite and non-negative, got {t}")))
    }
}

/// `θ̂^ML = γ`. Not restricted to the prior support.
pub fn ml_estimate(gamma: f64) -> f64 {
    gamma
}

impl CaseParams {
    /// `log p(x | θ)` with `xᵀx = 2t`.
    pub fn log_likelihood(&self, theta: f64, t: f64) -> f64 {
        -0.5 * self.nf() * (2.0 * std::f64::consts::PI * theta).ln() - t / theta
    }

    /// `log p(θ)`, the Beta(a, a) density.
    pub fn log_prior(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        let am1 = self.a - 1.0;
        let body = if am1 == 0.0 { 0.0 } else { am1 * (theta.ln() + (-theta).ln_1p()) };
        Ok(body - log_beta(self.a, self.a)?)
    }

    /// `log p(x, θ)` with `xᵀx = 2t`; `-inf` at `θ ∈ {0, 1}`.
    pub fn log_joint(&self, theta: f64, t: f64) -> Result<f64> {
        check_theta(theta)?;
        check_t(t)?;
        if theta == 0.0 || theta == 1.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_likelihood(theta, t) + self.log_prior(theta)?)
    }

    /// `log` of the joint density of `(t, θ)`, where `t | θ ~ (θ/2) χ²_N`.
    /// Differs from [`CaseParams::log_joint`] by a function of `t` alone.
    pub fn log_joint_t(&self, theta: f64, t: f64) -> f64 {
        if !(theta > 0.0 && theta < 1.0) || !(t > 0.0) {
            return f64::NEG_INFINITY;
        }
        let h = 0.5 * self.nf();
        let am1 = self.a - 1.0;
        let prior = if am1 == 0.0 { 0.0 } else { am1 * (theta.ln() + (-theta).ln_1p()) };
        (h - 1.0) * t.ln() - h * theta.ln() - t / theta - self.log_norm_t() + prior
    }

    fn log_norm_t(&self) -> f64 {
        // Both arguments are positive by construction.
        log_gamma(0.5 * self.nf()).unwrap_or(f64::NAN) + log_beta(self.a, self.a).unwrap_or(f64::NAN)
    }

    /// `∂ ln p(x, θ)/∂θ = (a−1−N/2)/θ + t/θ² − (a−1)/(1−θ)`.
    pub fn score(&self, theta: f64, t: f64) -> f64 {
        let am1 = self.a - 1.0;
        (am1 - 0.5 * self.nf()) / theta + t / (theta * theta) - am1 / (1.0 - theta)
    }

    /// `log(e^{t/2} W_{κ, μ}(t))`. Moments are ratios at a common `t`, so the
    /// `e^{-t/2}` factor is kept out of the logs to preserve their precision.
    fn log_w(&self, kappa: f64, mu: f64, t: f64) -> Result<f64> {
        whittaker_w_log_scaled(WhittakerArgs::new(kappa, mu, t))
    }

    /// `log W_{ξ, μ₀}(t)`, the factor shared by the marginal and every
    /// posterior moment.
    pub fn log_w0(&self, t: f64) -> Result<f64> {
        Ok(self.log_w(self.xi(), self.mu0(), t)? - 0.5 * t)
    }

    /// `log E[θ^k | t]` for real `k`, as `(k/2) ln t + ln W_{ξ−k/2, μ₀+k/2} − ln W_{ξ, μ₀}`.
    pub fn log_posterior_power(&self, t: f64, k: f64) -> Result<f64> {
        self.positive_t(t)?;
        Ok(0.5 * k * t.ln() + self.log_w(self.xi() - 0.5 * k, self.mu0() + 0.5 * k, t)?
            - self.log_w(self.xi(), self.mu0(), t)?)
    }

    fn positive_t(&self, t: f64) -> Result<()> {
        if t > 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("needs t > 0, got {t}")))
        }
    }

    /// Posterior expectation of one of the closed-form moments.
    pub fn posterior_moment(&self, t: f64, kind: Moment) -> Result<f64> {
        let l = match kind {
            Moment::Theta => self.log_posterior_power(t, 1.0)?,
            Moment::Theta2 => self.log_posterior_power(t, 2.0)?,
            Moment::InvTheta2 => self.log_posterior_power(t, -2.0)?,
            Moment::InvTheta3 => self.log_posterior_power(t, -3.0)?,
            Moment::InvOneMinusTheta2 => {
                self.require_bounds()?;
                self.positive_t(t)?;
                log_gamma(self.a - 2.0)? - log_gamma(self.a)? + self.log_w(self.xi() + 2.0, self.mu0(), t)?
                    - self.log_w(self.xi(), self.mu0(), t)?
            }
        };
        Ok(l.exp())
    }

    /// `log p(t)` through the tilted-Beta closed form.
    pub fn log_marginal_t(&self, t: f64) -> Result<f64> {
        self.positive_t(t)?;
        let nu = self.a - 0.5 * self.nf();
        // ∫₀¹ θ^{ν−1}(1−θ)^{a−1}e^{−t/θ}dθ in Whittaker form.
        let tilted = 0.5 * (nu - 1.0) * t.ln() - 0.5 * t + log_gamma(self.a)? + self.log_w0(t)?;
        Ok((0.5 * self.nf() - 1.0) * t.ln() + tilted - self.log_norm_t())
    }

    pub fn marginal_t_density(&self, t: f64) -> Result<f64> {
        Ok(self.log_marginal_t(t)?.exp())
    }

    /// `p(θ | t)`.
    pub fn posterior_pdf(&self, theta: f64, t: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok((self.log_joint_t(theta, t) - self.log_marginal_t(t)?).exp())
    }

    /// MAP estimate from `γ`, clamped to `[0, 1]`.
    pub fn map_estimate(&self, gamma: f64) -> Result<f64> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::domain(format!("gamma must be finite and non-negative, got {gamma}")));
        }
        if gamma == 0.0 {
            return Ok(0.0);
        }
        let c = MapCoefficients::new(self, gamma);
        let four = 4.0 * (self.a - 1.0);
        let est = if four.fract() == 0.0 && four == self.nf() {
            gamma / (0.5 + gamma)
        } else {
            // Root (β − √(β² − 4αγ)) / (2α), rationalized so it stays
            // accurate as α → 0.
            let disc = (c.beta * c.beta - 4.0 * c.alpha * c.gamma).max(0.0);
            2.0 * c.gamma / (c.beta + disc.sqrt())
        };
        Ok(est.clamp(0.0, 1.0))
    }

    /// Posterior mean `√t W_{ξ−1/2, μ₀+1/2}(t) / W_{ξ, μ₀}(t)`.
    pub fn mmse_estimate(&self, t: f64) -> Result<f64> {
        self.posterior_moment(t, Moment::Theta)
    }

    /// Posterior mean by the Whittaker ratio, checked against a 64-point
    /// Gauss-Legendre ratio over the posterior's central window. When the two
    /// differ by more than [`MMSE_CHECK_TOL`] the adaptive quadrature ratio
    /// is returned instead.
    pub fn mmse_estimate_checked(&self, t: f64) -> Result<MmseEstimate> {
        self.positive_t(t)?;
        let closed = self.mmse_estimate(t);
        let lj = |th: f64| self.log_joint_t(th, t);
        let domain = Domain::Finite { lo: 0.0, hi: 1.0 };
        let hint = self.map_estimate(2.0 * t / self.nf())?;
        let peak = locate_log_peak(&lj, domain, (hint > 0.0 && hint < 1.0).then_some(hint))
            .ok_or_else(|| Error::domain(format!("posterior has no mass at t = {t}")))?;
        let lo = (peak.mode - 16.0 * peak.left_width).max(0.0);
        let hi = (peak.mode + 16.0 * peak.right_width).min(1.0);
        let (nodes, weights) = gauss_legendre(64);
        let (mut s0, mut s1) = (0.0, 0.0);
        for (u, w) in nodes.iter().zip(&weights) {
            let th = 0.5 * (lo + hi) + 0.5 * (hi - lo) * u;
            let d = (lj(th) - peak.log_max).exp() * w;
            s0 += d;
            s1 += d * th;
        }
        let check = s1 / s0;
        if let Ok(v) = closed {
            if v.is_finite() && ((v - check) / check).abs() <= MMSE_CHECK_TOL {
                return Ok(MmseEstimate {
                    value: v,
                    used_fallback: false,
                });
            }
        }
        let w = integrate_log_weighted(
            lj,
            |th, out: &mut [f64]| {
                out[0] = 1.0;
                out[1] = th;
            },
            2,
            domain,
            Some(peak.mode),
            INNER_TOL,
        )?;
        Ok(MmseEstimate {
            value: w.values[1] / w.values[0],
            used_fallback: true,
        })
    }

    /// `F_B = (N + 4(a−1))(2a−1)/(a−2)`.
    pub fn bfim(&self) -> Result<f64> {
        self.require_bounds()?;
        let a = self.a;
        Ok((self.nf() + 4.0 * (a - 1.0)) * (2.0 * a - 1.0) / (a - 2.0))
    }

    /// `BCRB = 1 / F_B`.
    pub fn bcrb(&self) -> Result<f64> {
        Ok(1.0 / self.bfim()?)
    }

    /// `ECRB = (a+1) / (N (2a+1))`.
    pub fn ecrb(&self) -> f64 {
        (self.a + 1.0) / (self.nf() * (2.0 * self.a + 1.0))
    }

    /// Posterior Fisher information
    /// `(a−1−N/2) E[θ⁻²|t] + 2t E[θ⁻³|t] + (a−1) E[(1−θ)⁻²|t]`.
    pub fn posterior_fisher(&self, t: f64) -> Result<f64> {
        self.require_bounds()?;
        let am1 = self.a - 1.0;
        Ok((am1 - 0.5 * self.nf()) * self.posterior_moment(t, Moment::InvTheta2)?
            + 2.0 * t * self.posterior_moment(t, Moment::InvTheta3)?
            + am1 * self.posterior_moment(t, Moment::InvOneMinusTheta2)?)
    }

    /// Tighter BCRB, `E_t[1 / F_x]`.
    pub fn tbcrb(&self, method: Method) -> Result<Evaluated> {
        self.require_bounds()?;
        match method {
            Method::ClosedForm => self.tbcrb_closed_form(),
            Method::Engine | Method::Quadrature => {
                let m = CaseModel::new(*self);
                let lm = |t: f64| self.log_marginal_t(t).unwrap_or(f64::NAN);
                let ex = XExpectation::Quadrature {
                    domain: Domain::SemiInfinite { lo: 0.0 },
                    log_marginal: Some(&lm),
                    hint: None,
                    rel_tol: T_REL_TOL,
                };
                let b = engine::tbcrb(&m, &ex, INNER_TOL)?;
                Ok(Evaluated {
                    value: b.tighter.scalar(),
                    err_est: b.tighter.diagnostics.err_est,
                })
            }
        }
    }

    /// `∫ w(t) W²_{ξ,μ₀} / D(t) dt` where `D(t) = t F_x W_{ξ,μ₀}` is the
    /// three-term Whittaker combination and `w` is the t-weight.
    fn tbcrb_closed_form(&self) -> Result<Evaluated> {
        let (a, n) = (self.a, self.nf());
        let (xi, mu) = (self.xi(), self.mu0());
        let c3 = (a - 1.0) * (log_gamma(a - 2.0)? - log_gamma(a)?).exp();
        let failure = RefCell::new(None);
        let log_f = |t: f64| -> f64 {
            let r = (|| -> Result<f64> {
                let lw = self.log_w(xi, mu, t)?;
                let terms = [
                    (a - 1.0 - 0.5 * n, self.log_w(xi + 1.0, mu - 1.0, t)?),
                    (2.0 * t.sqrt(), self.log_w(xi + 1.5, (2.0 * a - n - 6.0) / 4.0, t)?),
                    (c3 * t, self.log_w(xi + 2.0, mu, t)?),
                ];
                let top = terms.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
                let d: f64 = terms.iter().map(|(c, l)| c * (l - top).exp()).sum();
                if !(d > 0.0) {
                    return Err(Error::domain(format!("posterior Fisher information not positive at t = {t}")));
                }
                Ok(2.0 * lw - top - d.ln() - 0.5 * t)
            })();
            r.unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            })
        };
        let r = integrate_weighted_t_log(log_f, a, self.n, T_REL_TOL);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let r = r?;
        let v = r.log_value.exp();
        Ok(Evaluated {
            value: v,
            err_est: v * r.rel_err,
        })
    }

    /// Minimum mean-square error `E_t[Var(θ | t)]`.
    ///
    /// `Quadrature` integrates the θ-quadrature posterior variance against
    /// `p(t)`; `ClosedForm` integrates
    /// `w(t) (W_{ξ−1, μ₀+1} − W²_{ξ−1/2, μ₀+1/2} / W_{ξ, μ₀})`.
    pub fn mmse_value(&self, method: Method) -> Result<Evaluated> {
        self.require_bounds()?;
        match method {
            Method::ClosedForm => self.mmse_closed_form(),
            Method::Quadrature | Method::Engine => self.mmse_quadrature(),
        }
    }

    fn mmse_closed_form(&self) -> Result<Evaluated> {
        let (xi, mu) = (self.xi(), self.mu0());
        let failure = RefCell::new(None);
        let log_f = |t: f64| -> f64 {
            let r = (|| -> Result<f64> {
                let l0 = self.log_w(xi, mu, t)?;
                let l2 = self.log_w(xi - 1.0, mu + 1.0, t)? - l0;
                let l1 = 2.0 * (self.log_w(xi - 0.5, mu + 0.5, t)? - l0);
                // W (e^{l2} − e^{l1}) with the difference taken in log form.
                let d = -(l1 - l2).exp_m1();
                if d > 0.0 {
                    Ok(l0 + l2 + d.ln() - 0.5 * t)
                } else if (l1 - l2).abs() < 1e-9 {
                    // Variance below the rounding floor of the two moments.
                    Ok(f64::NEG_INFINITY)
                } else {
                    Err(Error::domain(format!("negative posterior variance at t = {t}")))
                }
            })();
            r.unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            })
        };
        let r = integrate_weighted_t_log(log_f, self.a, self.n, MMSE_CLOSED_TOL);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let r = r?;
        let v = r.log_value.exp();
        Ok(Evaluated {
            value: v,
            err_est: v * r.rel_err,
        })
    }

    /// `(∫ p(t,θ) dθ, ∫ θ p(t,θ) dθ, ∫ θ² p(t,θ) dθ)` by θ-quadrature,
    /// scaled by a common factor.
    fn raw_moments(&self, t: f64, tol: f64) -> Result<[f64; 3]> {
        let w = integrate_log_weighted(
            |th| self.log_joint_t(th, t),
            |th, out: &mut [f64]| {
                out[0] = 1.0;
                out[1] = th;
                out[2] = th * th;
            },
            3,
            Domain::Finite { lo: 0.0, hi: 1.0 },
            self.posterior_mode_hint(t),
            tol,
        )?;
        Ok([w.values[0], w.values[1], w.values[2]])
    }

    /// Posterior variance by θ-quadrature.
    pub fn posterior_var_quadrature(&self, t: f64) -> Result<f64> {
        let [m0, m1, m2] = self.raw_moments(t, INNER_TOL)?;
        let mean = m1 / m0;
        Ok(m2 / m0 - mean * mean)
    }

    fn posterior_mode_hint(&self, t: f64) -> Option<f64> {
        let h = self.map_estimate(2.0 * t / self.nf()).ok()?;
        (h > 0.0 && h < 1.0).then_some(h)
    }

    fn mmse_quadrature(&self) -> Result<Evaluated> {
        let failure = RefCell::new(None);
        let lw = |t: f64| self.log_marginal_t(t).unwrap_or(f64::NAN);
        let f = |t: f64, out: &mut [f64]| {
            out[0] = 1.0;
            out[1] = match self.posterior_var_quadrature(t) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            };
        };
        let r = integrate_log_weighted(lw, f, 2, Domain::SemiInfinite { lo: 0.0 }, None, T_REL_TOL);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let r = r?;
        let v = r.values[1] / r.values[0];
        Ok(Evaluated {
            value: v,
            err_est: r.err_est[1] / r.values[0] + v * r.err_est[0] / r.values[0],
        })
    }

    /// Large-sample approximations of `p(θ | t)`, renormalized on `(0, 1)`.
    pub fn asymptotic_posterior(&self, theta: f64, t: f64, form: AsymptoticForm) -> Result<f64> {
        check_theta(theta)?;
        self.positive_t(t)?;
        let lf = self.asymptotic_log_kernel(t, form);
        let z = integrate_log(&lf, Domain::Finite { lo: 0.0, hi: 1.0 }, None, 1e-10)?;
        if theta == 0.0 || theta == 1.0 {
            return Ok(0.0);
        }
        Ok((lf(theta) - z.log_value).exp())
    }

    fn asymptotic_log_kernel(&self, t: f64, form: AsymptoticForm) -> impl Fn(f64) -> f64 {
        let n = self.nf();
        let g = 2.0 * t / n;
        move |th: f64| match form {
            AsymptoticForm::Prop3 => 0.5 * n * ((g / th).ln() - g / th),
            AsymptoticForm::Prop4 => {
                let v = 2.0 * g * g / n;
                -(th - g) * (th - g) / (2.0 * v)
            }
        }
    }
}

/// The case study as a [`JointModel`] over the summary `x = [t]`, using the
/// joint density of `(t, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseModel {
    pub params: CaseParams,
}

impl CaseModel {
    pub fn new(params: CaseParams) -> Self {
        CaseModel { params }
    }
}

impl JointModel for CaseModel {
    fn log_joint(&self, x: &[f64], theta: f64) -> f64 {
        self.params.log_joint_t(theta, x[0])
    }

    fn theta_support(&self, _x: &[f64]) -> Domain {
        Domain::Finite { lo: 0.0, hi: 1.0 }
    }

    fn g(&self, theta: f64, out: &mut [f64]) {
        out[0] = theta;
    }

    fn score(&self, x: &[f64], theta: f64) -> f64 {
        self.params.score(theta, x[0])
    }

    fn mode_hint(&self, x: &[f64]) -> Option<f64> {
        self.params.posterior_mode_hint(x[0])
    }
}

impl XSampler for CaseModel {
    fn draw(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let theta = crate::montecarlo::sample_prior(self.params.a, rng);
        vec![crate::montecarlo::sample_suffstat(theta, self.params.n, rng)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;

    fn p(a: f64, n: u32) -> CaseParams {
        CaseParams::new(a, n).unwrap()
    }

    fn posterior_quadrature(pp: &CaseParams, t: f64, f: impl Fn(f64) -> f64) -> f64 {
        let num = integrate_log_weighted(
            |th| pp.log_joint_t(th, t),
            |th, out: &mut [f64]| {
                out[0] = 1.0;
                out[1] = f(th);
            },
            2,
            Domain::Finite { lo: 0.0, hi: 1.0 },
            None,
            1e-12,
        )
        .unwrap();
        num.values[1] / num.values[0]
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(CaseParams::new(2.0, 8), Err(Error::UnsupportedRegime(_))));
        assert!(CaseParams::new(3.0, 0).is_err());
        let e = CaseParams::for_estimators(1.5, 8).unwrap();
        assert!(matches!(e.bcrb(), Err(Error::UnsupportedRegime(_))));
        assert!(matches!(e.tbcrb(Method::ClosedForm), Err(Error::UnsupportedRegime(_))));
        assert_relative_eq!(p(3.0, 8).prior_var(), 1.0 / 28.0);
    }

    #[test]
    fn suff_stat_and_map_coefficients() {
        let s = SuffStat::from_x(&[1.0, -1.0, 2.0, 0.0]);
        assert_eq!(s.t, 3.0);
        assert_eq!(s.gamma, 2.0 * s.t / 4.0);
        let c = MapCoefficients::new(&p(3.0, 16), 0.5);
        assert_eq!((c.alpha, c.beta, c.gamma), (0.5, 1.25, 0.5));
    }

    #[test]
    fn log_joint_is_likelihood_plus_prior() {
        let q = p(3.0, 2);
        let (th, t) = (0.5, 0.5);
        let lik = -(2.0 * std::f64::consts::PI * th).ln() - t / th;
        let prior = (th * th * (1.0 - th) * (1.0 - th) * 30.0f64).ln();
        assert_relative_eq!(q.log_joint(th, t).unwrap(), lik + prior, max_relative = 1e-14);
        // Uniform prior.
        let u = CaseParams::for_estimators(1.0, 2).unwrap();
        assert_relative_eq!(u.log_joint(0.3, 1.0).unwrap(), u.log_likelihood(0.3, 1.0), max_relative = 1e-15);
        assert_eq!(q.log_joint(0.0, 1.0).unwrap(), f64::NEG_INFINITY);
        assert!(q.log_joint(1.5, 1.0).is_err());
    }

    #[test]
    fn score_matches_rewritten_form() {
        let q = p(3.0, 16);
        let (th, gamma) = (0.3, 0.5);
        let t = 8.0 * gamma;
        let c = MapCoefficients::new(&q, gamma);
        let rewritten = 8.0 * (c.alpha * th * th - c.beta * th + c.gamma) / (th * th * (1.0 - th));
        assert_relative_eq!(q.score(th, t), rewritten, max_relative = 1e-12);
        // And it is the θ-derivative of the log joint.
        let h = 1e-5;
        let fd = (q.log_joint(th + h, t).unwrap() - q.log_joint(th - h, t).unwrap()) / (2.0 * h);
        assert_relative_eq!(q.score(th, t), fd, max_relative = 1e-8);
    }

    #[test]
    fn map_examples_and_stationarity() {
        assert_relative_eq!(p(3.0, 16).map_estimate(0.5).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(p(3.0, 8).map_estimate(0.5).unwrap(), 0.5, max_relative = 1e-15);
        assert_eq!(p(3.0, 8).map_estimate(0.0).unwrap(), 0.0);
        assert_eq!(ml_estimate(1.7), 1.7);
        for (a, n, g) in [(3.0, 2, 0.3), (3.0, 8, 1.2), (2.5, 64, 0.41), (4.0, 12, 0.05), (3.0, 4096, 0.4)] {
            let q = p(a, n);
            let th = q.map_estimate(g).unwrap();
            let t = 0.5 * f64::from(n) * g;
            assert!(th > 0.0 && th < 1.0);
            let h = 1e-6 * th.min(1.0 - th);
            let d = (q.log_joint(th + h, t).unwrap() - q.log_joint(th - h, t).unwrap()) / (2.0 * h);
            assert!(d.abs() < 1e-9 * q.score(th, t).abs().max(f64::from(n)) + 1e-5, "a={a} N={n}: {d}");
        }
    }

    #[test]
    fn posterior_moments_match_quadrature() {
        let q = p(3.0, 8);
        for t in [0.5, 2.0, 8.0] {
            let cases: [(Moment, fn(f64) -> f64); 5] = [
                (Moment::Theta, |x| x),
                (Moment::Theta2, |x| x * x),
                (Moment::InvTheta2, |x| x.powi(-2)),
                (Moment::InvTheta3, |x| x.powi(-3)),
                (Moment::InvOneMinusTheta2, |x| (1.0 - x).powi(-2)),
            ];
            for (kind, f) in cases {
                let closed = q.posterior_moment(t, kind).unwrap();
                let quad = posterior_quadrature(&q, t, f);
                assert_relative_eq!(closed, quad, max_relative = 1e-6);
            }
            let var = q.posterior_moment(t, Moment::Theta2).unwrap() - q.posterior_moment(t, Moment::Theta).unwrap().powi(2);
            assert!(var > 0.0);
        }
        // The explicit Whittaker form of E[θ² | t].
        let t = 2.0;
        let explicit = t * (q.log_w(q.xi() - 1.0, q.mu0() + 1.0, t).unwrap() - 0.5 * t - q.log_w0(t).unwrap()).exp();
        assert_relative_eq!(q.posterior_moment(t, Moment::Theta2).unwrap(), explicit, max_relative = 1e-14);
    }

    #[test]
    fn marginal_and_posterior_normalize() {
        let q = p(3.0, 8);
        let mass = integrate(
            |t| q.marginal_t_density(t).unwrap(),
            Domain::SemiInfinite { lo: 0.0 },
            1e-10,
            0.0,
        )
        .unwrap();
        assert_relative_eq!(mass.value, 1.0, max_relative = 1e-8);
        let mean = integrate(
            |t| t * q.marginal_t_density(t).unwrap(),
            Domain::SemiInfinite { lo: 0.0 },
            1e-10,
            0.0,
        )
        .unwrap();
        assert_relative_eq!(mean.value, 2.0, max_relative = 1e-8);
        let post = integrate(|th| q.posterior_pdf(th, 2.0).unwrap(), Domain::Finite { lo: 0.0, hi: 1.0 }, 1e-11, 0.0).unwrap();
        assert_relative_eq!(post.value, 1.0, max_relative = 1e-8);
        let r = q.posterior_pdf(0.3, 2.0).unwrap() / q.posterior_pdf(0.6, 2.0).unwrap();
        let j = (q.log_joint(0.3, 2.0).unwrap() - q.log_joint(0.6, 2.0).unwrap()).exp();
        assert_relative_eq!(r, j, max_relative = 1e-12);
    }

    #[test]
    fn marginal_matches_chi_square_mixture() {
        let q = p(3.0, 8);
        let t: f64 = 2.0;
        // ∫ θ^{-N/2} t^{N/2-1} e^{-t/θ} / Γ(N/2) p(θ) dθ with N = 8.
        let mix = integrate(
            |th: f64| th.powi(-4) * t.powi(3) * (-t / th).exp() / 6.0 * 30.0 * th * th * (1.0 - th) * (1.0 - th),
            Domain::Finite { lo: 0.0, hi: 1.0 },
            1e-12,
            0.0,
        )
        .unwrap();
        assert_relative_eq!(q.marginal_t_density(t).unwrap(), mix.value, max_relative = 1e-7);
    }

    #[test]
    fn mmse_estimator_properties() {
        let q = p(3.0, 8);
        let quad = posterior_quadrature(&q, 2.0, |x| x);
        assert_relative_eq!(q.mmse_estimate(2.0).unwrap(), quad, max_relative = 1e-6);
        let mut last = 0.0;
        for t in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 20.0] {
            let v = q.mmse_estimate(t).unwrap();
            assert!(v > last && v < 1.0);
            last = v;
        }
        let big = p(3.0, 2048);
        let v = big.mmse_estimate(0.5 * 2048.0 * 0.4).unwrap();
        assert!((v - 0.4).abs() < 0.02);
        let c = big.mmse_estimate_checked(0.5 * 2048.0 * 0.4).unwrap();
        assert!(!c.used_fallback);
        assert_relative_eq!(c.value, v, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_bounds() {
        assert_relative_eq!(p(3.0, 16).bfim().unwrap(), 120.0, max_relative = 1e-15);
        assert_relative_eq!(p(3.0, 16).bcrb().unwrap(), 1.0 / 120.0, max_relative = 1e-15);
        assert_relative_eq!(p(3.0, 8).bfim().unwrap(), 80.0, max_relative = 1e-15);
        assert_relative_eq!(p(3.0, 100).ecrb(), 4.0 / 700.0, max_relative = 1e-15);
        assert_relative_eq!(p(3.0, 16).ecrb(), 1.0 / 28.0, max_relative = 1e-15);
        for a in [2.5, 3.0, 7.0] {
            let q = p(a, 10);
            assert_relative_eq!(q.ecrb(), 0.2 * (q.prior_var() + 0.25), max_relative = 1e-14);
        }
    }

    #[test]
    fn posterior_fisher_matches_score_variance() {
        let q = p(3.0, 8);
        let t = 2.0;
        let quad = posterior_quadrature(&q, t, |th| q.score(th, t).powi(2));
        assert_relative_eq!(q.posterior_fisher(t).unwrap(), quad, max_relative = 1e-6);
        for t in [0.1, 1.0, 5.0, 30.0] {
            assert!(q.posterior_fisher(t).unwrap() > 0.0);
        }
    }

    #[test]
    fn tbcrb_two_routes_agree() {
        let q = p(3.0, 8);
        let c = q.tbcrb(Method::ClosedForm).unwrap();
        let e = q.tbcrb(Method::Engine).unwrap();
        assert_relative_eq!(c.value, e.value, max_relative = 1e-5);
        assert!(q.bcrb().unwrap() < c.value);
    }

    #[test]
    fn mmse_two_routes_agree() {
        let q = p(3.0, 8);
        let c = q.mmse_value(Method::ClosedForm).unwrap();
        let m = q.mmse_value(Method::Quadrature).unwrap();
        assert_relative_eq!(c.value, m.value, max_relative = 1e-6);
        assert!(m.value < q.prior_var());
        assert!(m.value > q.tbcrb(Method::ClosedForm).unwrap().value);
    }

    #[test]
    fn asymptotic_forms() {
        let q = p(3.0, 1024);
        let g = 0.4;
        let t = 512.0 * g;
        // Both forms peak at γ.
        for form in [AsymptoticForm::Prop3, AsymptoticForm::Prop4] {
            let at = |th: f64| q.asymptotic_posterior(th, t, form).unwrap();
            assert!(at(g) > at(g - 1e-3) && at(g) > at(g + 1e-3));
        }
        let norm = integrate(
            |th| q.asymptotic_posterior(th, t, AsymptoticForm::Prop4).unwrap(),
            Domain::Finite { lo: 0.0, hi: 1.0 },
            1e-9,
            0.0,
        )
        .unwrap();
        assert_relative_eq!(norm.value, 1.0, max_relative = 1e-7);
    }
}
