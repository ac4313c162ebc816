//! Estimation problems as seen by the bounds engine.
//!
//! A problem is a joint density `p(x, θ)` over an observation summary `x`
//! (any sufficient statistic, or the raw data) and a scalar parameter `θ`,
//! together with the quantity `g(θ)` to estimate. Generating families `φ`
//! are supplied separately through [`PhiFamily`] so one model can be paired
//! with several bounds.

use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_log, Domain};

/// Joint density of an observation summary and a scalar parameter.
pub trait JointModel: Sync {
    /// `log p(x, θ)`; `-inf` outside the support.
    fn log_joint(&self, x: &[f64], theta: f64) -> f64;

    /// `S_{Θ|x}`, the set of `θ` with `p(x, θ) > 0`.
    fn theta_support(&self, x: &[f64]) -> Domain;

    /// Length `L` of `g(θ)`.
    fn dim_g(&self) -> usize {
        1
    }

    /// The quantity to estimate.
    fn g(&self, theta: f64, out: &mut [f64]);

    /// `∂ log p(x, θ) / ∂θ`. The default is a five-point central difference
    /// with the step shrunk to stay inside the support.
    fn score(&self, x: &[f64], theta: f64) -> f64 {
        let d = self.theta_support(x);
        let mut h = 1e-4 * theta.abs().max(1e-2);
        let room = (theta - d.lo()).min(d.hi() - theta);
        if room.is_finite() {
            h = h.min(0.25 * room);
        }
        let f = |s: f64| self.log_joint(x, theta + s * h);
        (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * h)
    }

    /// Approximate posterior mode, used to seed quadrature when known.
    fn mode_hint(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// A generating family `φ(x, θ)` of `M` functions.
pub trait PhiFamily: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], theta: f64, out: &mut [f64]);
}

/// A `φ` family from a closure.
pub struct FnPhi<F> {
    dim: usize,
    f: F,
}

impl<F> FnPhi<F>
where
    F: Fn(&[f64], f64, &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnPhi { dim, f }
    }
}

impl<F> PhiFamily for FnPhi<F>
where
    F: Fn(&[f64], f64, &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], theta: f64, out: &mut [f64]) {
        (self.f)(x, theta, out)
    }
}

/// Draws observation summaries from the marginal `p(x)`.
pub trait XSampler: Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Global moment matrices `R = E[g φᵀ]` and `Q = E[φ φᵀ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundMatrices {
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

/// One named check of [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A probe point `(x, θ)` for [`validate_model`].
pub type Probe = (Vec<f64>, f64);

/// Spot-checks a model and generating family on probe points: finiteness
/// of `log p`, `g` and `φ`; normalizability of `p(x, ·)` for every probed
/// `x`; and linear independence of the `φ` components (rank of the probe
/// Gram matrix).
pub fn validate_model<M: JointModel, P: PhiFamily>(m: &M, phi: &P, probes: &[Probe]) -> ValidationReport {
    let (dim_l, dim_m) = (m.dim_g(), phi.dim());
    let mut gv = vec![0.0; dim_l];
    let mut pv = vec![0.0; dim_m];
    let mut gram = DMatrix::<f64>::zeros(dim_m, dim_m);
    let mut bad = Vec::new();
    for (x, th) in probes {
        let lj = m.log_joint(x, *th);
        m.g(*th, &mut gv);
        phi.eval(x, *th, &mut pv);
        if !lj.is_finite() || gv.iter().chain(&pv).any(|v| !v.is_finite()) {
            bad.push(format!("x = {x:?}, theta = {th}"));
            continue;
        }
        // Unit-normalized so that one probe with large values cannot hide
        // the directions spanned by the others.
        let col = DMatrix::from_column_slice(dim_m, 1, &pv);
        let norm = col.norm();
        if norm > 0.0 {
            gram += (&col * col.transpose()) / (norm * norm);
        }
    }
    let finite = Check {
        name: "finiteness",
        passed: bad.is_empty() && dim_l >= 1 && dim_m >= 1,
        detail: if bad.is_empty() {
            format!("{} probes finite", probes.len())
        } else {
            format!("non-finite at {}", bad.join("; "))
        },
    };

    let mut xs: Vec<&Vec<f64>> = Vec::new();
    for (x, _) in probes {
        if !xs.iter().any(|y| *y == x) {
            xs.push(x);
        }
    }
    let mut failures = Vec::new();
    for x in &xs {
        match integrate_log(|t| m.log_joint(x, t), m.theta_support(x), m.mode_hint(x), 1e-8) {
            Ok(r) if r.log_value.is_finite() => {}
            Ok(r) => failures.push(format!("x = {x:?}: log mass {}", r.log_value)),
            Err(e) => failures.push(format!("x = {x:?}: {e}")),
        }
    }
    let normalizable = Check {
        name: "normalizability",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{} summaries with finite mass", xs.len())
        } else {
            failures.join("; ")
        },
    };

    let sv = gram.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * top && top > 0.0).count();
    let independent = Check {
        name: "independence",
        passed: rank == dim_m,
        detail: format!("Gram rank {rank} of {dim_m}"),
    };

    ValidationReport {
        checks: vec![finite, normalizable, independent],
    }
}

/// `x̄ ~ N(θ, σ²/N)` with prior `θ ~ N(m₀, s₀²)`, estimating `g(θ) = θ`.
/// The summary is `x = [x̄]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianConjugate {
    pub n: u32,
    pub noise_var: f64,
    pub prior_mean: f64,
    pub prior_var: f64,
}

impl GaussianConjugate {
    pub fn new(n: u32, noise_var: f64, prior_mean: f64, prior_var: f64) -> Result<Self> {
        if n == 0 || !(noise_var > 0.0) || !(prior_var > 0.0) || !prior_mean.is_finite() {
            return Err(Error::domain("Gaussian model needs N >= 1 and positive variances"));
        }
        Ok(GaussianConjugate {
            n,
            noise_var,
            prior_mean,
            prior_var,
        })
    }

    fn mean_var(&self) -> f64 {
        self.noise_var / f64::from(self.n)
    }

    /// Posterior variance, the same for every observation.
    pub fn posterior_var(&self) -> f64 {
        1.0 / (1.0 / self.prior_var + 1.0 / self.mean_var())
    }

    pub fn posterior_mean(&self, xbar: f64) -> f64 {
        self.posterior_var() * (self.prior_mean / self.prior_var + xbar / self.mean_var())
    }

    /// `log p(x̄)`, Gaussian with variance `s₀² + σ²/N`.
    pub fn log_marginal(&self, xbar: f64) -> f64 {
        log_normal(xbar, self.prior_mean, self.prior_var + self.mean_var())
    }
}

fn log_normal(x: f64, m: f64, v: f64) -> f64 {
    -0.5 * ((x - m) * (x - m) / v + (2.0 * std::f64::consts::PI * v).ln())
}

impl JointModel for GaussianConjugate {
    fn log_joint(&self, x: &[f64], theta: f64) -> f64 {
        log_normal(x[0], theta, self.mean_var()) + log_normal(theta, self.prior_mean, self.prior_var)
    }

    fn theta_support(&self, _x: &[f64]) -> Domain {
        Domain::Real
    }

    fn g(&self, theta: f64, out: &mut [f64]) {
        out[0] = theta;
    }

    fn score(&self, x: &[f64], theta: f64) -> f64 {
        (self.posterior_mean(x[0]) - theta) / self.posterior_var()
    }

    fn mode_hint(&self, x: &[f64]) -> Option<f64> {
        Some(self.posterior_mean(x[0]))
    }
}

impl XSampler for GaussianConjugate {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        // Both standard deviations are positive by construction.
        let theta = Normal::new(self.prior_mean, self.prior_var.sqrt()).unwrap().sample(rng);
        vec![Normal::new(theta, self.mean_var().sqrt()).unwrap().sample(rng)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn score_phi<M: JointModel>(m: &M) -> FnPhi<impl Fn(&[f64], f64, &mut [f64]) + Sync + '_> {
        FnPhi::new(1, move |x: &[f64], t: f64, out: &mut [f64]| out[0] = m.score(x, t))
    }

    #[test]
    fn gaussian_posterior_parameters() {
        let m = GaussianConjugate::new(4, 1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(m.posterior_var(), 0.2, max_relative = 1e-15);
        assert_relative_eq!(m.posterior_mean(1.0), 0.8, max_relative = 1e-15);
        assert!(GaussianConjugate::new(0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn default_score_matches_analytic() {
        struct Numeric(GaussianConjugate);
        impl JointModel for Numeric {
            fn log_joint(&self, x: &[f64], t: f64) -> f64 {
                self.0.log_joint(x, t)
            }
            fn theta_support(&self, x: &[f64]) -> Domain {
                self.0.theta_support(x)
            }
            fn g(&self, t: f64, out: &mut [f64]) {
                self.0.g(t, out)
            }
        }
        let g = GaussianConjugate::new(4, 1.0, 0.3, 2.0).unwrap();
        let n = Numeric(g);
        for (xb, th) in [(0.1, -0.4), (2.0, 1.5), (-1.0, 0.0)] {
            assert_relative_eq!(n.score(&[xb], th), g.score(&[xb], th), epsilon = 1e-8);
        }
    }

    #[test]
    fn gaussian_model_validates() {
        let m = GaussianConjugate::new(4, 1.0, 0.0, 1.0).unwrap();
        let probes: Vec<Probe> = vec![(vec![0.0], -0.5), (vec![0.0], 0.5), (vec![1.0], 0.2)];
        let r = validate_model(&m, &score_phi(&m), &probes);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn duplicated_phi_fails_independence() {
        let m = GaussianConjugate::new(4, 1.0, 0.0, 1.0).unwrap();
        let phi = FnPhi::new(2, |x: &[f64], t: f64, out: &mut [f64]| {
            out[0] = x[0] - t;
            out[1] = 2.0 * out[0];
        });
        let probes: Vec<Probe> = vec![(vec![0.0], -0.5), (vec![1.0], 0.5), (vec![2.0], 0.1)];
        let r = validate_model(&m, &phi, &probes);
        assert!(!r.check("independence").unwrap().passed);
        assert!(r.check("finiteness").unwrap().passed);
    }

    #[test]
    fn nan_log_joint_fails_finiteness() {
        struct Broken;
        impl JointModel for Broken {
            fn log_joint(&self, _x: &[f64], t: f64) -> f64 {
                if t == 0.5 {
                    f64::NAN
                } else {
                    -t * t
                }
            }
            fn theta_support(&self, _x: &[f64]) -> Domain {
                Domain::Real
            }
            fn g(&self, t: f64, out: &mut [f64]) {
                out[0] = t;
            }
        }
        let phi = FnPhi::new(1, |_: &[f64], t: f64, out: &mut [f64]| out[0] = t);
        let r = validate_model(&Broken, &phi, &[(vec![0.0], 0.5), (vec![0.0], 0.1)]);
        assert!(!r.check("finiteness").unwrap().passed);
        assert!(!r.passed());
    }

    #[test]
    fn sampler_matches_marginal_moments() {
        let m = GaussianConjugate::new(4, 1.0, 0.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40_000;
        let xs: Vec<f64> = (0..n).map(|_| m.draw(&mut rng)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Marginal N(0.5, 1.25).
        assert!((mean - 0.5).abs() < 3.0 * (1.25f64 / n as f64).sqrt() + 1e-3);
        assert!((var - 1.25).abs() < 0.05);
    }
}
