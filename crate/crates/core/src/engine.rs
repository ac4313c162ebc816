//! Classical and tighter Bayesian lower bounds.
//!
//! For a generating family `φ` with zero posterior mean, the classical
//! bound is `R Q⁻¹ Rᵀ` with joint moments `R = E[g φᵀ]`, `Q = E[φ φᵀ]`.
//! The tighter bound applies the same inequality under the posterior,
//! `E_x[R_x Q_x⁻¹ R_xᵀ]`. Posterior moments are formed from joint-only
//! integrals `R̃_x = ∫ g φᵀ p(x, θ) dθ` and `Q̃_x = ∫ φ φᵀ p(x, θ) dθ`, so
//! `p(x)` cancels and never has to be known in closed form.

use std::cell::{Cell, RefCell};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{JointModel, PhiFamily, XSampler};
use crate::quadrature::{integrate_log, integrate_log_weighted, Domain};

/// Condition-number ceiling for inverting `Q`.
pub const MAX_COND: f64 = 1e12;

/// Largest share of Monte-Carlo draws allowed to have a singular `Q_x`.
pub const MAX_SINGULAR_SHARE: f64 = 1e-3;

/// Default relative tolerance of the inner θ-integrals.
pub const INNER_TOL: f64 = 1e-11;

/// Joint-only posterior integrals at one observation.
///
/// The integrals are stored divided by `exp(log_scale)` to stay
/// representable; the posterior moments are the ratios returned by
/// [`ConditionalMoments::r_x`] and [`ConditionalMoments::q_x`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    pub r_tilde: DMatrix<f64>,
    pub q_tilde: DMatrix<f64>,
    /// `∫ φ p(x, θ) dθ`, scaled like the matrices.
    pub phi_tilde: Vec<f64>,
    /// `∫ p(x, θ) dθ`, scaled like the matrices.
    pub mass: f64,
    pub log_scale: f64,
    /// `log p(x)`.
    pub log_px: f64,
    /// Largest quadrature error relative to the absolute mass of a component.
    pub rel_err: f64,
    pub evals: usize,
}

impl ConditionalMoments {
    /// `R_{gφ|x} = R̃_x / p(x)`.
    pub fn r_x(&self) -> DMatrix<f64> {
        &self.r_tilde / self.mass
    }

    /// `Q_{φ|x} = Q̃_x / p(x)`.
    pub fn q_x(&self) -> DMatrix<f64> {
        &self.q_tilde / self.mass
    }

    /// `E[φ | x]`.
    pub fn phi_mean(&self) -> Vec<f64> {
        self.phi_tilde.iter().map(|v| v / self.mass).collect()
    }
}

/// Posterior integrals of `g φᵀ`, `φ φᵀ`, `φ` and `1` at `x`, in one
/// vector quadrature over `S_{Θ|x}`.
pub fn conditional_moments<M: JointModel, P: PhiFamily>(
    m: &M,
    phi: &P,
    x: &[f64],
    tol: f64,
) -> Result<ConditionalMoments> {
    let (l, k) = (m.dim_g(), phi.dim());
    if l == 0 || k == 0 {
        return Err(Error::InvalidConfig("g and phi need at least one component".into()));
    }
    let dim = 1 + k + l * k + k * k;
    let f = |th: f64, out: &mut [f64]| {
        let mut g = vec![0.0; l];
        m.g(th, &mut g);
        out[0] = 1.0;
        let (head, rest) = out[1..].split_at_mut(k);
        phi.eval(x, th, head);
        let (rg, rq) = rest.split_at_mut(l * k);
        for i in 0..l {
            for j in 0..k {
                rg[i * k + j] = g[i] * head[j];
            }
        }
        for i in 0..k {
            for j in 0..k {
                rq[i * k + j] = head[i] * head[j];
            }
        }
    };
    let w = integrate_log_weighted(|th| m.log_joint(x, th), f, dim, m.theta_support(x), m.mode_hint(x), tol)?;
    let mass = w.values[0];
    if !(mass > 0.0) {
        return Err(Error::domain(format!("p(x, .) has no mass at x = {x:?}")));
    }
    let rel_err = w
        .err_est
        .iter()
        .zip(&w.abs_mass)
        .map(|(e, a)| if *a > 0.0 { e / a } else { 0.0 })
        .fold(0.0, f64::max);
    let v = &w.values;
    Ok(ConditionalMoments {
        phi_tilde: v[1..1 + k].to_vec(),
        r_tilde: DMatrix::from_row_slice(l, k, &v[1 + k..1 + k + l * k]),
        q_tilde: sym(DMatrix::from_row_slice(k, k, &v[1 + k + l * k..])),
        mass,
        log_scale: w.log_scale,
        log_px: mass.ln() + w.log_scale,
        rel_err,
        evals: w.evals,
    })
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// `Q⁻¹` through a symmetric eigendecomposition, with the condition guard.
/// Returns the inverse and the condition number.
pub fn guarded_inverse(q: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if !q.is_square() || q.nrows() == 0 {
        return Err(Error::InvalidConfig(format!("Q must be square, got {}x{}", q.nrows(), q.ncols())));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularQ { cond: f64::INFINITY });
    }
    let eig = sym(q.clone()).symmetric_eigen();
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond < MAX_COND) {
        return Err(Error::SingularQ { cond });
    }
    let inv_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    let v = &eig.eigenvectors;
    Ok((sym(v * inv_d * v.transpose()), cond))
}

/// Classical bound `R Q⁻¹ Rᵀ`, symmetrized.
pub fn blb_classical(r: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if r.ncols() != q.nrows() {
        return Err(Error::InvalidConfig(format!(
            "R is {}x{} but Q is {}x{}",
            r.nrows(),
            r.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let (qi, _) = guarded_inverse(q)?;
    Ok(sym(r * qi * r.transpose()))
}

/// Scalar `r² / q`, with the same guard as the matrix path.
pub fn blb_scalar(r: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() || !r.is_finite() {
        return Err(Error::SingularQ { cond: f64::INFINITY });
    }
    Ok(r * r / q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Classical,
    Tighter,
    Bcrb,
    Tbcrb,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Largest condition number of an inverted `Q` or `Q_x`.
    pub max_cond: f64,
    /// Error estimate of the bound: quadrature error for deterministic
    /// expectations, standard error of the mean for Monte-Carlo.
    pub err_est: f64,
    pub evaluated: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub bound: DMatrix<f64>,
    pub kind: BoundKind,
    pub diagnostics: Diagnostics,
}

impl BoundReport {
    /// The `(0, 0)` entry, the whole bound for scalar problems.
    pub fn scalar(&self) -> f64 {
        self.bound[(0, 0)]
    }
}

/// Both bounds from one expectation pass over `x`, together with the
/// global moments behind the classical one.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationBounds {
    pub tighter: BoundReport,
    pub classical: BoundReport,
    pub moments: crate::model::BoundMatrices,
}

/// How `E_x[·]` is evaluated.
pub enum XExpectation<'a> {
    /// Averages over draws of a sampler. Draw `i` uses the ChaCha stream `i`
    /// of `seed`, so the sample set does not depend on `partitions`.
    MonteCarlo {
        sampler: &'a dyn XSampler,
        draws: usize,
        seed: u64,
        partitions: usize,
    },
    /// A fixed weighted set of summaries.
    Grid { xs: &'a [Vec<f64>], weights: &'a [f64] },
    /// Adaptive quadrature over a scalar summary `x = [s]`. `log_marginal`
    /// gives `log p(s)`; without it `p(s)` is integrated out of the joint.
    Quadrature {
        domain: Domain,
        log_marginal: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
        hint: Option<f64>,
        rel_tol: f64,
    },
}

/// Per-observation quantities of the tighter bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PerX {
    pub bound: DMatrix<f64>,
    pub r_x: DMatrix<f64>,
    pub q_x: DMatrix<f64>,
    pub cond: f64,
    pub rel_err: f64,
}

/// `R_x Q_x⁻¹ R_xᵀ` at one observation.
pub fn per_x<M: JointModel, P: PhiFamily>(m: &M, phi: &P, x: &[f64], tol: f64) -> Result<PerX> {
    let cm = conditional_moments(m, phi, x, tol)?;
    let (r_x, q_x) = (cm.r_x(), cm.q_x());
    let (qi, cond) = guarded_inverse(&q_x)?;
    Ok(PerX {
        bound: sym(&r_x * qi * r_x.transpose()),
        r_x,
        q_x,
        cond,
        rel_err: cm.rel_err,
    })
}

/// Accumulated weighted sums of per-x quantities.
#[derive(Clone)]
struct Acc {
    w: f64,
    bound: DMatrix<f64>,
    bound_sq: DMatrix<f64>,
    r: DMatrix<f64>,
    q: DMatrix<f64>,
    max_cond: f64,
    n: usize,
    dropped: usize,
}

impl Acc {
    fn new(l: usize, k: usize) -> Self {
        Acc {
            w: 0.0,
            bound: DMatrix::zeros(l, l),
            bound_sq: DMatrix::zeros(l, l),
            r: DMatrix::zeros(l, k),
            q: DMatrix::zeros(k, k),
            max_cond: 0.0,
            n: 0,
            dropped: 0,
        }
    }

    fn add(&mut self, w: f64, p: &PerX) {
        self.w += w;
        self.bound += &p.bound * w;
        self.bound_sq += p.bound.component_mul(&p.bound) * w;
        self.r += &p.r_x * w;
        self.q += &p.q_x * w;
        self.max_cond = self.max_cond.max(p.cond);
        self.n += 1;
    }

    fn merge(mut self, o: &Acc) -> Acc {
        self.w += o.w;
        self.bound += &o.bound;
        self.bound_sq += &o.bound_sq;
        self.r += &o.r;
        self.q += &o.q;
        self.max_cond = self.max_cond.max(o.max_cond);
        self.n += o.n;
        self.dropped += o.dropped;
        self
    }
}

/// Combines per-x moments `(weight, R_x, Q_x)` into the tighter and the
/// classical bound. Weights are normalized to sum to one.
pub fn bounds_from_moments(items: &[(f64, DMatrix<f64>, DMatrix<f64>)]) -> Result<ExpectationBounds> {
    let Some((_, r0, q0)) = items.first() else {
        return Err(Error::InvalidConfig("no observations".into()));
    };
    let mut acc = Acc::new(r0.nrows(), q0.nrows());
    for (w, r, q) in items {
        let (qi, cond) = guarded_inverse(q)?;
        let p = PerX {
            bound: sym(r * qi * r.transpose()),
            r_x: r.clone(),
            q_x: q.clone(),
            cond,
            rel_err: 0.0,
        };
        acc.add(*w, &p);
    }
    finish(acc, 0.0, None)
}

fn finish(acc: Acc, err_est: f64, se: Option<f64>) -> Result<ExpectationBounds> {
    if !(acc.w > 0.0) {
        return Err(Error::InvalidConfig("expectation weights sum to zero".into()));
    }
    let tighter = sym(&acc.bound / acc.w);
    let r = &acc.r / acc.w;
    let q = sym(&acc.q / acc.w);
    let (qi, cond) = guarded_inverse(&q)?;
    let classical = sym(&r * qi * r.transpose());
    let diag = |c: f64| Diagnostics {
        max_cond: c,
        err_est: se.unwrap_or(err_est),
        evaluated: acc.n,
        dropped: acc.dropped,
    };
    Ok(ExpectationBounds {
        tighter: BoundReport {
            bound: tighter,
            kind: BoundKind::Tighter,
            diagnostics: diag(acc.max_cond),
        },
        classical: BoundReport {
            bound: classical,
            kind: BoundKind::Classical,
            diagnostics: diag(cond),
        },
        moments: crate::model::BoundMatrices { r, q },
    })
}

/// Stream-seeded generator for draw `index` of a run.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Tighter bound `E_x[R_x Q_x⁻¹ R_xᵀ]` and, from the same pass, the
/// classical bound built on `R = E_x[R_x]`, `Q = E_x[Q_x]`.
pub fn tblb<M: JointModel, P: PhiFamily>(m: &M, phi: &P, ex: &XExpectation<'_>, tol: f64) -> Result<ExpectationBounds> {
    let (l, k) = (m.dim_g(), phi.dim());
    match ex {
        XExpectation::Grid { xs, weights } => {
            if xs.len() != weights.len() || xs.is_empty() {
                return Err(Error::InvalidConfig("grid needs one weight per summary".into()));
            }
            let mut acc = Acc::new(l, k);
            let mut err: f64 = 0.0;
            for (x, w) in xs.iter().zip(weights.iter()) {
                let p = per_x(m, phi, x, tol)?;
                err = err.max(p.rel_err);
                acc.add(*w, &p);
            }
            let b = acc.bound.norm() / acc.w;
            finish(acc, err * b, None)
        }
        XExpectation::MonteCarlo {
            sampler,
            draws,
            seed,
            partitions,
        } => {
            let (draws, parts) = (*draws, (*partitions).max(1));
            if draws == 0 {
                return Err(Error::InvalidConfig("Monte-Carlo expectation needs draws > 0".into()));
            }
            let chunk = draws.div_ceil(parts);
            let partials: Vec<Result<Acc>> = (0..parts)
                .into_par_iter()
                .map(|c| {
                    let mut acc = Acc::new(l, k);
                    for i in (c * chunk)..((c + 1) * chunk).min(draws) {
                        let x = sampler.draw(&mut draw_rng(*seed, i as u64));
                        match per_x(m, phi, &x, tol) {
                            Ok(p) => acc.add(1.0, &p),
                            Err(Error::SingularQ { .. }) => acc.dropped += 1,
                            Err(e) => return Err(e),
                        }
                    }
                    Ok(acc)
                })
                .collect();
            let mut total = Acc::new(l, k);
            for p in partials {
                total = total.merge(&p?);
            }
            if total.dropped as f64 > MAX_SINGULAR_SHARE * draws as f64 {
                return Err(Error::TooManyFailures {
                    failed: total.dropped,
                    total: draws,
                    what: "singular Q_x draws".into(),
                });
            }
            let n = total.n as f64;
            let mean = total.bound[(0, 0)] / n;
            let var = (total.bound_sq[(0, 0)] / n - mean * mean).max(0.0);
            let se = (var / (n - 1.0).max(1.0)).sqrt();
            finish(total, 0.0, Some(se))
        }
        XExpectation::Quadrature {
            domain,
            log_marginal,
            hint,
            rel_tol,
        } => {
            let failure: RefCell<Option<Error>> = RefCell::new(None);
            let max_cond = Cell::new(0.0f64);
            let lw = |s: f64| match log_marginal {
                Some(f) => f(s),
                None => {
                    let x = [s];
                    integrate_log(|th| m.log_joint(&x, th), m.theta_support(&x), m.mode_hint(&x), tol)
                        .map(|r| r.log_value)
                        .unwrap_or(f64::NAN)
                }
            };
            // Layout: bound (l*l), R_x (l*k), Q_x (k*k), then 1 for the mass.
            let dim = l * l + l * k + k * k + 1;
            let f = |s: f64, out: &mut [f64]| match per_x(m, phi, &[s], tol) {
                Ok(p) => {
                    out[..l * l].copy_from_slice(p.bound.transpose().as_slice());
                    out[l * l..l * l + l * k].copy_from_slice(p.r_x.transpose().as_slice());
                    out[l * l + l * k..dim - 1].copy_from_slice(p.q_x.transpose().as_slice());
                    out[dim - 1] = 1.0;
                    max_cond.set(max_cond.get().max(p.cond));
                }
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    out.iter_mut().for_each(|o| *o = f64::NAN);
                }
            };
            let w = integrate_log_weighted(lw, f, dim, *domain, *hint, *rel_tol);
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            let w = w?;
            let v = &w.values;
            let total = v[dim - 1];
            let mut acc = Acc::new(l, k);
            acc.w = total;
            acc.bound = DMatrix::from_row_slice(l, l, &v[..l * l]);
            acc.r = DMatrix::from_row_slice(l, k, &v[l * l..l * l + l * k]);
            acc.q = DMatrix::from_row_slice(k, k, &v[l * l + l * k..dim - 1]);
            acc.max_cond = max_cond.get();
            acc.n = w.evals;
            let err = w.err_est[..l * l].iter().fold(0.0, |a: f64, e| a.max(*e)) / total;
            finish(acc, err, None)
        }
    }
}

/// The score family `φ^CR(x, θ) = ∂ ln p(θ|x) / ∂θ`, zero off the support.
pub struct ScorePhi<'m, M> {
    model: &'m M,
}

pub fn phi_cr<M: JointModel>(m: &M) -> ScorePhi<'_, M> {
    ScorePhi { model: m }
}

impl<M: JointModel> PhiFamily for ScorePhi<'_, M> {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], theta: f64, out: &mut [f64]) {
        out[0] = if self.model.theta_support(x).contains(theta) {
            self.model.score(x, theta)
        } else {
            0.0
        };
    }
}

/// Bobrovsky-Zakaï family with one shift per component.
pub struct BzPhi<'m, M> {
    model: &'m M,
    shifts: Vec<f64>,
}

impl<'m, M: JointModel> BzPhi<'m, M> {
    pub fn new(model: &'m M, shifts: Vec<f64>) -> Result<Self> {
        if shifts.is_empty() || shifts.iter().any(|h| *h == 0.0 || !h.is_finite()) {
            return Err(Error::domain("Bobrovsky-Zakai shifts must be finite and non-zero"));
        }
        Ok(BzPhi { model, shifts })
    }
}

impl<M: JointModel> PhiFamily for BzPhi<'_, M> {
    fn dim(&self) -> usize {
        self.shifts.len()
    }

    fn eval(&self, x: &[f64], theta: f64, out: &mut [f64]) {
        match phi_bz(self.model, &self.shifts, x, theta) {
            Ok(v) => out.copy_from_slice(&v),
            Err(_) => out.iter_mut().for_each(|o| *o = f64::NAN),
        }
    }
}

/// `φ_m = [p(θ+h_m|x) 1{θ+h_m ∈ S} − p(θ|x) 1{θ−h_m ∈ S}] / p(θ|x)` on the
/// support and `0` off it. Posterior ratios are taken as joint ratios.
pub fn phi_bz<M: JointModel>(m: &M, h: &[f64], x: &[f64], theta: f64) -> Result<Vec<f64>> {
    let s = m.theta_support(x);
    if !s.contains(theta) {
        return Ok(vec![0.0; h.len()]);
    }
    let l0 = m.log_joint(x, theta);
    if l0 == f64::NEG_INFINITY || l0.is_nan() {
        return Err(Error::domain(format!("p(x, theta) = 0 at on-support theta = {theta}")));
    }
    h.iter()
        .map(|&hm| {
            if hm == 0.0 {
                return Err(Error::domain("Bobrovsky-Zakai shift must be non-zero"));
            }
            let up = if s.contains(theta + hm) {
                (m.log_joint(x, theta + hm) - l0).exp()
            } else {
                0.0
            };
            let down = if s.contains(theta - hm) { 1.0 } else { 0.0 };
            Ok(up - down)
        })
        .collect()
}

/// `φ = g(θ) − E[g | x]`, the family whose bound is the MMSE.
pub struct CenteredG<'m, M> {
    model: &'m M,
    tol: f64,
}

pub fn centered_g<M: JointModel>(m: &M, tol: f64) -> CenteredG<'_, M> {
    CenteredG { model: m, tol }
}

impl<M: JointModel> CenteredG<'_, M> {
    /// `E[g | x]` by quadrature.
    pub fn posterior_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.model;
        let l = m.dim_g();
        let w = integrate_log_weighted(
            |th| m.log_joint(x, th),
            |th, out: &mut [f64]| {
                out[0] = 1.0;
                m.g(th, &mut out[1..]);
            },
            l + 1,
            m.theta_support(x),
            m.mode_hint(x),
            self.tol,
        )?;
        Ok(w.values[1..].iter().map(|v| v / w.values[0]).collect())
    }
}

impl<M: JointModel> PhiFamily for CenteredG<'_, M> {
    fn dim(&self) -> usize {
        self.model.dim_g()
    }

    fn eval(&self, x: &[f64], theta: f64, out: &mut [f64]) {
        match self.posterior_mean(x) {
            Ok(mean) => {
                self.model.g(theta, out);
                out.iter_mut().zip(mean).for_each(|(o, m)| *o -= m);
            }
            Err(_) => out.iter_mut().for_each(|o| *o = f64::NAN),
        }
    }
}

/// Classical and tighter Cramér-Rao bounds (`φ = φ^CR`).
pub fn tbcrb<M: JointModel>(m: &M, ex: &XExpectation<'_>, tol: f64) -> Result<ExpectationBounds> {
    let mut b = tblb(m, &phi_cr(m), ex, tol)?;
    b.tighter.kind = BoundKind::Tbcrb;
    b.classical.kind = BoundKind::Bcrb;
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equality {
    Equal,
    DependsOnX,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityReport {
    pub verdict: Equality,
    pub max_deviation: f64,
    /// `R_x Q_x⁻¹` at each probe.
    pub gains: Vec<DMatrix<f64>>,
}

/// Whether `R_x Q_x⁻¹` is constant over the probes, the condition for the
/// classical and tighter bounds to coincide. The deviation is the largest
/// pairwise max-norm difference.
pub fn equality_check<M: JointModel, P: PhiFamily>(m: &M, phi: &P, probes: &[Vec<f64>], tol: f64) -> Result<EqualityReport> {
    if probes.len() < 2 {
        return Err(Error::InvalidConfig("equality check needs at least two probes".into()));
    }
    let gains = probes
        .iter()
        .map(|x| {
            let cm = conditional_moments(m, phi, x, INNER_TOL)?;
            let (qi, _) = guarded_inverse(&cm.q_x())?;
            Ok(cm.r_x() * qi)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dev: f64 = 0.0;
    for (i, a) in gains.iter().enumerate() {
        for b in &gains[i + 1..] {
            dev = dev.max((a - b).amax());
        }
    }
    Ok(EqualityReport {
        verdict: if dev < tol { Equality::Equal } else { Equality::DependsOnX },
        max_deviation: dev,
        gains,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub passed: bool,
    /// Per probe, `|E[φ_m | x]| / sqrt(E[φ_m² | x])` for each component.
    pub normalized_means: Vec<Vec<f64>>,
    pub max_deviation: f64,
}

/// Checks `E[φ | x] = 0` at each probe. The mean is measured relative to the
/// posterior root-mean-square of the component, so the tolerance is
/// scale-free.
pub fn wwf_membership<M: JointModel, P: PhiFamily>(m: &M, phi: &P, probes: &[Vec<f64>], tol: f64) -> Result<MembershipReport> {
    let k = phi.dim();
    let mut out = Vec::with_capacity(probes.len());
    let mut worst: f64 = 0.0;
    for x in probes {
        let cm = conditional_moments(m, phi, x, INNER_TOL)?;
        let q = cm.q_x();
        let mean = cm.phi_mean();
        let row: Vec<f64> = (0..k)
            .map(|i| {
                let rms = q[(i, i)].sqrt();
                if rms > 0.0 {
                    mean[i].abs() / rms
                } else {
                    0.0
                }
            })
            .collect();
        worst = row.iter().copied().fold(worst, f64::max);
        out.push(row);
    }
    Ok(MembershipReport {
        passed: worst < tol,
        normalized_means: out,
        max_deviation: worst,
    })
}
