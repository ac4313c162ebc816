//! Conjugate exponential families and efficiency diagnostics.
//!
//! With likelihood `p(x|θ) = h(x) exp[η(θ)ᵀ t(x) − A(θ)]` and conjugate prior
//! `p(θ; λ, μ) ∝ exp[η(θ)ᵀ μ − λ A(θ)]`, the posterior is the prior with
//! `(λ + 1, μ + t(x))`. An estimator `ĝ` of `g(θ)` attains the tighter BCRB
//! iff the posterior score is `(ĝ(x) − g(θ)) / v(x)` for some `v(x) > 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate_log, locate_log_peak, peak_breakpoints, Domain};

/// An exponential-family likelihood.
pub trait ExpFamSpec: Sync {
    /// Length `J` of `η` and `t`.
    fn dim(&self) -> usize;
    fn log_h(&self, x: &[f64]) -> f64;
    fn eta(&self, theta: f64) -> Vec<f64>;
    fn t_stat(&self, x: &[f64]) -> Vec<f64>;
    /// Log-partition `A(θ)`.
    fn log_partition(&self, theta: f64) -> f64;
    fn theta_domain(&self) -> Domain;
}

/// Hyperparameters `(λ, μ)` of the conjugate prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateHyper {
    pub lambda: f64,
    pub mu: Vec<f64>,
}

impl ConjugateHyper {
    pub fn new(lambda: f64, mu: Vec<f64>) -> Self {
        ConjugateHyper { lambda, mu }
    }
}

/// Posterior hyperparameters `(λ + 1, μ + t(x))`.
pub fn conjugate_update(hyper: &ConjugateHyper, t_of_x: &[f64]) -> Result<ConjugateHyper> {
    if hyper.mu.len() != t_of_x.len() {
        return Err(Error::InvalidConfig(format!(
            "statistic has length {} but mu has length {}",
            t_of_x.len(),
            hyper.mu.len()
        )));
    }
    Ok(ConjugateHyper {
        lambda: hyper.lambda + 1.0,
        mu: hyper.mu.iter().zip(t_of_x).map(|(m, t)| m + t).collect(),
    })
}

/// `log κ(λ, μ)`, minus the log of `∫ exp[η(θ)ᵀ μ − λ A(θ)] dθ` over `Θ`.
/// Fails when the integral is not finite.
pub fn log_prior_normalizer<S: ExpFamSpec>(spec: &S, hyper: &ConjugateHyper) -> Result<f64> {
    let lf = |th: f64| log_conjugate_kernel(spec, hyper, th);
    let r = integrate_log(lf, spec.theta_domain(), None, 1e-10)?;
    if !r.log_value.is_finite() {
        return Err(Error::domain("conjugate prior does not normalize"));
    }
    Ok(-r.log_value)
}

fn log_conjugate_kernel<S: ExpFamSpec>(spec: &S, hyper: &ConjugateHyper, theta: f64) -> f64 {
    let eta = spec.eta(theta);
    let dot: f64 = eta.iter().zip(&hyper.mu).map(|(e, m)| e * m).sum();
    dot - hyper.lambda * spec.log_partition(theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    pub is_efficient: bool,
    /// RMS residual of the fit divided by the RMS of the score.
    pub deviation: f64,
    pub fitted_ghat: f64,
    pub fitted_v: f64,
}

/// Default threshold on [`EfficiencyReport::deviation`].
pub const EFFICIENCY_TOL: f64 = 1e-6;

/// Least-squares fit of `score(θ) ≈ (ĝ − g(θ)) / v` over `grid`.
pub fn scalar_efficiency_test<F, G>(score: F, g: G, grid: &[f64], tol: f64) -> Result<EfficiencyReport>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if grid.len() < 10 {
        return Err(Error::DegenerateFit(format!("needs at least 10 grid points, got {}", grid.len())));
    }
    let s: Vec<f64> = grid.iter().map(|&t| score(t)).collect();
    let gv: Vec<f64> = grid.iter().map(|&t| g(t)).collect();
    if s.iter().chain(&gv).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("score or g not finite on the grid".into()));
    }
    let n = grid.len() as f64;
    let gm = gv.iter().sum::<f64>() / n;
    let sm = s.iter().sum::<f64>() / n;
    let sgg: f64 = gv.iter().map(|v| (v - gm) * (v - gm)).sum();
    let gscale = gv.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if sgg <= (1e-12 * gscale).powi(2) * n {
        return Err(Error::DegenerateFit("g is constant on the grid".into()));
    }
    // s ≈ c0 + c1 g with c1 = −1/v and c0 = ĝ/v.
    let c1 = gv.iter().zip(&s).map(|(g, s)| (g - gm) * (s - sm)).sum::<f64>() / sgg;
    let c0 = sm - c1 * gm;
    let rss: f64 = gv.iter().zip(&s).map(|(g, s)| (s - c0 - c1 * g).powi(2)).sum();
    let ss: f64 = s.iter().map(|v| v * v).sum();
    let deviation = if ss > 0.0 { (rss / ss).sqrt() } else { 0.0 };
    let fitted_v = -1.0 / c1;
    let fitted_ghat = -c0 / c1;
    Ok(EfficiencyReport {
        is_efficient: deviation < tol && fitted_v > 0.0,
        deviation,
        fitted_ghat,
        fitted_v,
    })
}

/// `n` equal-mass points of the density `exp(log_pdf)` on `domain`, at the
/// probabilities `(i + 1/2) / n`.
pub fn posterior_quantile_grid<F: Fn(f64) -> f64>(log_pdf: F, domain: Domain, n: usize) -> Result<Vec<f64>> {
    let peak = locate_log_peak(&log_pdf, domain, None).ok_or_else(|| Error::DegenerateFit("density has no mass".into()))?;
    let mut edges = peak_breakpoints(&peak, domain);
    if domain.lo().is_finite() {
        edges.insert(0, domain.lo());
    }
    if domain.hi().is_finite() {
        edges.push(domain.hi());
    }
    // Cumulative mass on a refined partition, 8-point Gauss-Legendre per cell.
    let (gx, gw) = gauss_legendre(8);
    let cell_mass = |a: f64, b: f64| -> f64 {
        gx.iter()
            .zip(&gw)
            .map(|(u, wt)| {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * u;
                let l = log_pdf(x) - peak.log_max;
                if l.is_nan() {
                    0.0
                } else {
                    wt * l.exp()
                }
            })
            .sum::<f64>()
            * 0.5
            * (b - a)
    };
    let mut xs = vec![edges[0]];
    let mut cdf = vec![0.0];
    for w in edges.windows(2) {
        for j in 0..16 {
            let a = w[0] + (w[1] - w[0]) * j as f64 / 16.0;
            let b = w[0] + (w[1] - w[0]) * (j + 1) as f64 / 16.0;
            let mass = cell_mass(a, b);
            xs.push(b);
            cdf.push(cdf.last().unwrap() + mass);
        }
    }
    let total = *cdf.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::DegenerateFit("density has no mass".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let p = (i as f64 + 0.5) / n as f64 * total;
        while k + 2 < cdf.len() && cdf[k + 1] < p {
            k += 1;
        }
        let (mut lo, mut hi) = (xs[k], xs[k + 1]);
        let target = p - cdf[k];
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cell_mass(xs[k], mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

/// The efficient pair of a natural-parameter family, `η(θ) = η₀ + k c θ`
/// for a direction `c` and a scalar `k > 0`. With `ĝ(x) = cᵀ (t(x) + μ)` and
/// `g(θ) = (λ+1) A'(θ) / k` the posterior score is `(ĝ(x) − g(θ)) / v` with
/// `v = 1/k`.
pub struct NaturalPair<'s, S> {
    spec: &'s S,
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub c: Vec<f64>,
    /// Slope of `η` along `c`.
    pub k: f64,
}

impl<S: ExpFamSpec> NaturalPair<'_, S> {
    /// `(λ + 1) A'(θ) / k`, with `A'` by a five-point central difference.
    pub fn g(&self, theta: f64) -> f64 {
        let h = 1e-4 * theta.abs().max(1.0);
        let a = |j: f64| self.spec.log_partition(theta + j * h);
        (self.lambda + 1.0) * (a(-2.0) - 8.0 * a(-1.0) + 8.0 * a(1.0) - a(2.0)) / (12.0 * h * self.k)
    }

    pub fn ghat(&self, x: &[f64]) -> f64 {
        let t = self.spec.t_stat(x);
        self.c.iter().zip(t.iter().zip(&self.mu)).map(|(c, (t, m))| c * (t + m)).sum()
    }

    pub fn v(&self) -> f64 {
        1.0 / self.k
    }
}

fn probe_points(d: Domain) -> [f64; 3] {
    match d {
        Domain::Real => [-1.0, 0.0, 1.0],
        Domain::SemiInfinite { lo } => [lo + 0.5, lo + 1.0, lo + 2.0],
        Domain::Finite { lo, hi } => {
            let w = hi - lo;
            [lo + 0.25 * w, lo + 0.5 * w, lo + 0.75 * w]
        }
    }
}

/// Builds the efficient pair after checking on three points of `Θ` that `η`
/// moves along `c` with a constant positive slope.
pub fn natural_efficient_pair<'s, S: ExpFamSpec>(spec: &'s S, hyper: &ConjugateHyper, c: &[f64]) -> Result<NaturalPair<'s, S>> {
    if c.len() != spec.dim() || hyper.mu.len() != spec.dim() {
        return Err(Error::InvalidConfig("c and mu must match the statistic length".into()));
    }
    let cc: f64 = c.iter().map(|v| v * v).sum();
    if !(cc > 0.0) {
        return Err(Error::InvalidConfig("c must be nonzero".into()));
    }
    let pts = probe_points(spec.theta_domain());
    let e0 = spec.eta(pts[1]);
    let diffs: Vec<(f64, Vec<f64>)> = [pts[0], pts[2]]
        .iter()
        .map(|&p| (p - pts[1], spec.eta(p).iter().zip(&e0).map(|(e, z)| e - z).collect()))
        .collect();
    // Least-squares slope over both probes, then the worst componentwise gap.
    let num: f64 = diffs.iter().map(|(dt, de)| dt * de.iter().zip(c).map(|(d, c)| d * c).sum::<f64>()).sum();
    let den: f64 = diffs.iter().map(|(dt, _)| dt * dt * cc).sum();
    let k = num / den;
    let mut residual: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (dt, de) in &diffs {
        for (d, cj) in de.iter().zip(c) {
            residual = residual.max((d - k * cj * dt).abs());
            scale = scale.max(d.abs());
        }
    }
    if !(residual <= 1e-9 * scale) || !(k > 0.0) {
        return Err(Error::NotNaturalParameter { residual });
    }
    Ok(NaturalPair {
        spec,
        lambda: hyper.lambda,
        mu: hyper.mu.clone(),
        c: c.to_vec(),
        k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub mean: f64,
    pub variance: f64,
    /// Largest absolute gap between the log-density and the fitted quadratic.
    pub sup_deviation: f64,
}

/// Quadratic least-squares fit of a log-density on `grid`. The constant term
/// absorbs the normalization.
pub fn gaussian_posterior_fit<F: Fn(f64) -> f64>(log_pdf: F, grid: &[f64]) -> Result<GaussianFit> {
    if grid.len() < 3 {
        return Err(Error::DegenerateFit("quadratic fit needs at least 3 points".into()));
    }
    let n = grid.len();
    let center = grid.iter().sum::<f64>() / n as f64;
    let spread = grid.iter().fold(0.0f64, |a, x| a.max((x - center).abs()));
    if !(spread > 0.0) {
        return Err(Error::DegenerateFit("grid has a single point".into()));
    }
    let ys: Vec<f64> = grid.iter().map(|&x| log_pdf(x)).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::DegenerateFit("log-density not finite on the grid".into()));
    }
    let design = DMatrix::from_fn(n, 3, |i, j| ((grid[i] - center) / spread).powi(j as i32));
    let y = DVector::from_column_slice(&ys);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let fitted = &design * &coef;
    let sup_deviation = (y - fitted).amax();
    let (b, c) = (coef[1] / spread, coef[2] / (spread * spread));
    if !(c < 0.0) {
        return Err(Error::DegenerateFit("fitted log-density is not concave".into()));
    }
    Ok(GaussianFit {
        mean: center - b / (2.0 * c),
        variance: -1.0 / (2.0 * c),
        sup_deviation,
    })
}

/// Gaussian likelihood for the mean with known noise variance; the summary
/// is the whole sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMean {
    pub n: u32,
    pub noise_var: f64,
}

impl ExpFamSpec for GaussianMean {
    fn dim(&self) -> usize {
        1
    }

    fn log_h(&self, x: &[f64]) -> f64 {
        let s2 = self.noise_var;
        -x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s2) - 0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI * s2).ln()
    }

    fn eta(&self, theta: f64) -> Vec<f64> {
        vec![theta / self.noise_var]
    }

    fn t_stat(&self, x: &[f64]) -> Vec<f64> {
        vec![x.iter().sum()]
    }

    fn log_partition(&self, theta: f64) -> f64 {
        f64::from(self.n) * theta * theta / (2.0 * self.noise_var)
    }

    fn theta_domain(&self) -> Domain {
        Domain::Real
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_study::CaseParams;
    use crate::model::{GaussianConjugate, JointModel};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn conjugate_update_examples() {
        let h = conjugate_update(&ConjugateHyper::new(2.0, vec![1.0, 0.0]), &[0.0, 0.0]).unwrap();
        assert_eq!(h, ConjugateHyper::new(3.0, vec![1.0, 0.0]));
        let h = conjugate_update(&ConjugateHyper::new(0.0, vec![0.0, 0.0]), &[3.0, -1.0]).unwrap();
        assert_eq!(h, ConjugateHyper::new(1.0, vec![3.0, -1.0]));
        assert!(conjugate_update(&h, &[1.0]).is_err());
    }

    #[test]
    fn sequential_gaussian_updates() {
        // One observation at a time; prior N(0, 1) is λ = 1, μ = 0 for A = θ²/2.
        let spec = GaussianMean { n: 1, noise_var: 1.0 };
        let data = [0.3, -1.2, 2.0, 0.7];
        let mut h = ConjugateHyper::new(1.0, vec![0.0]);
        for x in data {
            h = conjugate_update(&h, &spec.t_stat(&[x])).unwrap();
        }
        // Posterior kernel exp(θ μ − λ θ²/2): mean μ/λ, variance 1/λ.
        let sum: f64 = data.iter().sum();
        assert_relative_eq!(h.mu[0] / h.lambda, sum / 5.0, max_relative = 1e-15);
        assert_relative_eq!(1.0 / h.lambda, 0.2, max_relative = 1e-15);
        let k = log_prior_normalizer(&spec, &h).unwrap();
        // Normalizer of exp(θ μ − λ θ²/2).
        let expect = -(0.5 * (2.0 * std::f64::consts::PI / h.lambda).ln() + h.mu[0] * h.mu[0] / (2.0 * h.lambda));
        assert_relative_eq!(k, expect, max_relative = 1e-9);
    }

    #[test]
    fn gaussian_model_is_efficient() {
        let m = GaussianConjugate::new(4, 1.0, 0.0, 1.0).unwrap();
        let x = [0.9];
        let grid = posterior_quantile_grid(|t| m.log_joint(&x, t), Domain::Real, 64).unwrap();
        let r = scalar_efficiency_test(|t| m.score(&x, t), |t| t, &grid, EFFICIENCY_TOL).unwrap();
        assert!(r.is_efficient, "{r:?}");
        assert_relative_eq!(r.fitted_ghat, m.posterior_mean(0.9), max_relative = 1e-10);
        assert_relative_eq!(r.fitted_v, 0.2, max_relative = 1e-10);
    }

    #[test]
    fn case_study_is_not_efficient_at_small_n() {
        let sweep = |n: u32, t: f64| {
            let p = CaseParams::new(3.0, n).unwrap();
            let grid = posterior_quantile_grid(|th| p.log_joint_t(th, t), Domain::Finite { lo: 0.0, hi: 1.0 }, 64).unwrap();
            scalar_efficiency_test(|th| p.score(th, t), |th| th, &grid, EFFICIENCY_TOL).unwrap()
        };
        let small = sweep(8, 2.0);
        assert!(!small.is_efficient);
        // Same γ = 2t/N = 0.4 at every N; the score flattens toward affine.
        let devs: Vec<f64> = [8u32, 64, 512, 4096]
            .iter()
            .map(|&n| sweep(n, 0.2 * f64::from(n)))
            .inspect(|r| assert!(!r.is_efficient))
            .map(|r| r.deviation)
            .collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
        assert!(devs[3] * 5.0 < small.deviation, "{devs:?} {small:?}");
        // Expanding the score to second order around the mode gives 4/√N.
        assert!((devs[3] * 64.0 / 4.0 - 1.0).abs() < 0.1, "{devs:?}");
    }

    #[test]
    fn quantile_grid_of_a_gaussian() {
        let g = posterior_quantile_grid(|x| -0.5 * x * x, Domain::Real, 64).unwrap();
        assert_eq!(g.len(), 64);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_relative_eq!(g[31] + g[32], 0.0, epsilon = 1e-6);
        // Φ⁻¹(0.5 / 64) = −2.417559016...
        assert!((g[0] + 2.417559016).abs() < 1e-6, "{}", g[0]);
    }

    #[test]
    fn efficiency_test_errors() {
        let grid: Vec<f64> = (0..12).map(|i| i as f64).collect();
        assert!(matches!(
            scalar_efficiency_test(|t| t, |_| 1.0, &grid, 1e-6),
            Err(Error::DegenerateFit(_))
        ));
        assert!(scalar_efficiency_test(|t| t, |t| t, &grid[..5], 1e-6).is_err());
        // Exact affine score with negative slope is efficient; positive slope
        // would need v < 0.
        assert!(scalar_efficiency_test(|t| 2.0 - t, |t| t, &grid, 1e-6).unwrap().is_efficient);
        assert!(!scalar_efficiency_test(|t| t - 2.0, |t| t, &grid, 1e-6).unwrap().is_efficient);
    }

    #[test]
    fn natural_pair_for_gaussian_mean() {
        let spec = GaussianMean { n: 4, noise_var: 1.0 };
        // Prior N(0, 1): exp(−θ²/2) = exp(−λ A) with λ = 1/4.
        let hyper = ConjugateHyper::new(0.25, vec![0.0]);
        let pair = natural_efficient_pair(&spec, &hyper, &[1.0]).unwrap();
        let x = [0.2, 1.1, -0.4, 0.9];
        let sum: f64 = x.iter().sum();
        assert_relative_eq!(pair.ghat(&x), sum, max_relative = 1e-15);
        assert_relative_eq!(pair.g(0.7), 1.25 * 4.0 * 0.7, max_relative = 1e-9);
        // ĝ / ((λ+1)N) is the posterior mean.
        assert_relative_eq!(pair.ghat(&x) / 5.0, sum / 5.0, max_relative = 1e-15);
        assert_relative_eq!(pair.v(), 1.0, max_relative = 1e-12);
        let double = natural_efficient_pair(&spec, &hyper, &[2.0]).unwrap();
        assert_relative_eq!(double.ghat(&x), 2.0 * pair.ghat(&x), max_relative = 1e-15);
        assert_relative_eq!(double.g(0.7), 2.0 * pair.g(0.7), max_relative = 1e-12);
        // Score identity: posterior score equals (ĝ − g)/v at any θ.
        let m = GaussianConjugate::new(4, 1.0, 0.0, 1.0).unwrap();
        let xbar = sum / 4.0;
        for th in [-1.0, 0.3, 2.0] {
            let s = m.score(&[xbar], th);
            assert_relative_eq!(s, (double.ghat(&x) - double.g(th)) / double.v(), max_relative = 1e-8);
        }
    }

    #[test]
    fn curved_family_is_rejected() {
        struct Curved;
        impl ExpFamSpec for Curved {
            fn dim(&self) -> usize {
                2
            }
            fn log_h(&self, _x: &[f64]) -> f64 {
                0.0
            }
            fn eta(&self, t: f64) -> Vec<f64> {
                vec![t, t * t]
            }
            fn t_stat(&self, x: &[f64]) -> Vec<f64> {
                vec![x[0], x[0] * x[0]]
            }
            fn log_partition(&self, t: f64) -> f64 {
                t * t
            }
            fn theta_domain(&self) -> Domain {
                Domain::Real
            }
        }
        let r = natural_efficient_pair(&Curved, &ConjugateHyper::new(1.0, vec![0.0, 0.0]), &[1.0, 0.0]);
        assert!(matches!(r, Err(Error::NotNaturalParameter { .. })));
    }

    #[test]
    fn gaussian_fit_recovers_parameters() {
        let grid: Vec<f64> = (0..40).map(|i| -1.0 + 0.1 * i as f64).collect();
        let f = gaussian_posterior_fit(|x| -(x - 0.7f64).powi(2) / (2.0 * 0.3) - 4.0, &grid).unwrap();
        assert!(f.sup_deviation < 1e-10);
        assert_relative_eq!(f.mean, 0.7, max_relative = 1e-10);
        assert_relative_eq!(f.variance, 0.3, max_relative = 1e-10);
        assert!(gaussian_posterior_fit(|x| x * x, &grid).is_err());
    }

    #[test]
    fn case_study_posterior_becomes_gaussian() {
        let fit = |n: u32, t: f64| {
            let p = CaseParams::new(3.0, n).unwrap();
            let grid = posterior_quantile_grid(|th| p.log_joint_t(th, t), Domain::Finite { lo: 0.0, hi: 1.0 }, 64).unwrap();
            gaussian_posterior_fit(|th| p.log_joint_t(th, t), &grid).unwrap()
        };
        assert!(fit(8, 2.0).sup_deviation > 0.1);
        let g = 0.4;
        let n = 4096;
        let f = fit(n, 0.5 * f64::from(n) * g);
        assert!((f.mean - g).abs() < 0.01 * g);
        let v = 2.0 * g * g / f64::from(n);
        assert!((f.variance - v).abs() < 0.1 * v, "{f:?} vs {v}");
    }

    proptest! {
        #[test]
        fn updates_commute(
            lambda in -5.0f64..5.0,
            mu in prop::collection::vec(-10.0f64..10.0, 3),
            t1 in prop::collection::vec(-10.0f64..10.0, 3),
            t2 in prop::collection::vec(-10.0f64..10.0, 3),
        ) {
            let h = ConjugateHyper::new(lambda, mu);
            let a = conjugate_update(&conjugate_update(&h, &t1).unwrap(), &t2).unwrap();
            let b = conjugate_update(&conjugate_update(&h, &t2).unwrap(), &t1).unwrap();
            prop_assert!((a.lambda - (h.lambda + 2.0)).abs() <= 1e-12 * (1.0 + h.lambda.abs()));
            for j in 0..3 {
                prop_assert!((a.mu[j] - b.mu[j]).abs() <= 1e-12 * (1.0 + a.mu[j].abs()));
                prop_assert!((a.mu[j] - (h.mu[j] + t1[j] + t2[j])).abs() <= 1e-12 * (1.0 + a.mu[j].abs()));
            }
        }
    }
}
