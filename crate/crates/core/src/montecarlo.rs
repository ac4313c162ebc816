//! Seeded, parallel Monte-Carlo experiments for the case study.
//!
//! Every trial draws from its own ChaCha8 stream, keyed by the experiment
//! seed, `N` and the trial index, so the sample set does not depend on how
//! trials are spread over threads. Per-trial results are collected in trial
//! order and reduced sequentially.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::case_study::{ml_estimate, CaseParams, Method};
use crate::engine::draw_rng;
use crate::error::{Error, Result};

/// `θ ~ Beta(a, a)` as `G₁ / (G₁ + G₂)` with independent `Gamma(a, 1)` draws.
pub fn sample_prior<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(a, 1.0).expect("shape must be positive");
    loop {
        let (x, y) = (g.sample(rng), g.sample(rng));
        let th = x / (x + y);
        if th > 0.0 && th < 1.0 {
            return th;
        }
    }
}

/// `t = (θ/2) χ²_N`, drawn as `θ · Gamma(N/2, 1)`.
pub fn sample_suffstat<R: Rng + ?Sized>(theta: f64, n: u32, rng: &mut R) -> f64 {
    let g = Gamma::new(0.5 * f64::from(n), 1.0).expect("N must be positive");
    theta * g.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Map,
    Ml,
    /// Posterior mean by the Whittaker ratio alone.
    Mmse,
    /// Posterior mean with the quadrature consistency check and fallback.
    MmseQuadratureFallback,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Map => "map",
            Estimator::Ml => "ml",
            Estimator::Mmse => "mmse",
            Estimator::MmseQuadratureFallback => "mmse_quadrature_fallback",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "map" => Ok(Estimator::Map),
            "ml" => Ok(Estimator::Ml),
            "mmse" => Ok(Estimator::Mmse),
            "mmse_quadrature_fallback" => Ok(Estimator::MmseQuadratureFallback),
            _ => Err(Error::InvalidConfig(format!("unknown estimator {s:?}"))),
        }
    }

    fn estimate(self, p: &CaseParams, t: f64) -> Result<f64> {
        let gamma = 2.0 * t / f64::from(p.n());
        match self {
            Estimator::Map => p.map_estimate(gamma),
            Estimator::Ml => Ok(ml_estimate(gamma)),
            Estimator::Mmse => p.mmse_estimate(t),
            Estimator::MmseQuadratureFallback => p.mmse_estimate_checked(t).map(|e| e.value),
        }
    }
}

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20240601;

/// Largest share of failed trials tolerated in a row.
pub const MAX_FAILURE_SHARE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub a: f64,
    pub n_list: Vec<u32>,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Thread count; `None` uses the global pool. Does not change results.
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 100 {
            return Err(Error::InvalidConfig(format!("trials must be at least 100, got {}", self.trials)));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::InvalidConfig("N list must be non-empty with N >= 1".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("N list must be strictly ascending".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators selected".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        CaseParams::for_estimators(self.a, 1).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub theta_true: f64,
    pub t: f64,
    /// One entry per configured estimator; `None` marks a failure.
    pub estimates: Vec<Option<f64>>,
    pub sq_errors: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorStats {
    pub estimator: Estimator,
    pub mse: f64,
    /// Standard error of `mse`.
    pub se_mse: f64,
    pub rmse: f64,
    /// Delta-method standard error of `rmse`.
    pub se_rmse: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub n: u32,
    pub stats: Vec<EstimatorStats>,
    pub sqrt_bcrb: f64,
    pub sqrt_tbcrb: f64,
    pub sqrt_ecrb: f64,
    pub sqrt_mmse_theory: f64,
}

impl RmseRow {
    pub fn stat(&self, e: Estimator) -> Option<&EstimatorStats> {
        self.stats.iter().find(|s| s.estimator == e)
    }

    /// The MMSE column: the checked estimator when present.
    pub fn mmse_stat(&self) -> Option<&EstimatorStats> {
        self.stat(Estimator::MmseQuadratureFallback).or_else(|| self.stat(Estimator::Mmse))
    }
}

/// Stream seed for one `N`, a SplitMix64 finalizer over the pair.
fn stream_seed(seed: u64, n: u32) -> u64 {
    let mut z = seed ^ u64::from(n).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One trial at sample size `n`.
pub fn run_trial(p: &CaseParams, estimators: &[Estimator], seed: u64, index: u64) -> TrialRecord {
    run_trial_with(p, estimators.len(), seed, index, |k, t| estimators[k].estimate(p, t))
}

fn run_trial_with<F>(p: &CaseParams, count: usize, seed: u64, index: u64, est: F) -> TrialRecord
where
    F: Fn(usize, f64) -> Result<f64>,
{
    let mut rng = draw_rng(stream_seed(seed, p.n()), index);
    let theta = sample_prior(p.a(), &mut rng);
    let t = sample_suffstat(theta, p.n(), &mut rng);
    let estimates: Vec<Option<f64>> = (0..count).map(|k| est(k, t).ok().filter(|v| v.is_finite())).collect();
    let sq_errors = estimates.iter().map(|e| e.map(|v| (v - theta) * (v - theta))).collect();
    TrialRecord {
        theta_true: theta,
        t,
        estimates,
        sq_errors,
    }
}

fn collect_trials<F>(cfg: &ExperimentConfig, p: &CaseParams, est: &F) -> Vec<TrialRecord>
where
    F: Fn(usize, f64) -> Result<f64> + Sync,
{
    let k = cfg.estimators.len();
    let work = || {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|i| run_trial_with(p, k, cfg.seed, i, est))
            .collect()
    };
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    }
}

fn summarize(estimator: Estimator, records: &[TrialRecord], k: usize) -> Result<EstimatorStats> {
    let total = records.len();
    let (mut n, mut sum) = (0usize, 0.0);
    for r in records {
        if let Some(e) = r.sq_errors[k] {
            n += 1;
            sum += e;
        }
    }
    let failed = total - n;
    if failed as f64 > MAX_FAILURE_SHARE * total as f64 || n < 2 {
        return Err(Error::TooManyFailures {
            failed,
            total,
            what: format!("{} estimator", estimator.name()),
        });
    }
    let mse = sum / n as f64;
    let ss: f64 = records.iter().filter_map(|r| r.sq_errors[k]).map(|e| (e - mse) * (e - mse)).sum();
    let se_mse = (ss / (n - 1) as f64 / n as f64).sqrt();
    let rmse = mse.sqrt();
    let se_rmse = if rmse > 0.0 { se_mse / (2.0 * rmse) } else { 0.0 };
    Ok(EstimatorStats {
        estimator,
        mse,
        se_mse,
        rmse,
        se_rmse,
        failed,
    })
}

/// Bound columns from the closed forms. `NaN` when `a <= 2`.
fn bound_columns(a: f64, n: u32) -> Result<[f64; 4]> {
    let Ok(p) = CaseParams::new(a, n) else {
        return Ok([f64::NAN; 4]);
    };
    Ok([
        p.bcrb()?.sqrt(),
        p.tbcrb(Method::ClosedForm)?.value.sqrt(),
        p.ecrb().sqrt(),
        p.mmse_value(Method::ClosedForm)?.value.sqrt(),
    ])
}

fn run_with<F>(cfg: &ExperimentConfig, est_for: impl Fn(&CaseParams) -> F) -> Result<Vec<RmseRow>>
where
    F: Fn(usize, f64) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let p = CaseParams::for_estimators(cfg.a, n)?;
        let records = collect_trials(cfg, &p, &est_for(&p));
        let stats = cfg
            .estimators
            .iter()
            .enumerate()
            .map(|(k, &e)| summarize(e, &records, k))
            .collect::<Result<Vec<_>>>()?;
        let [sqrt_bcrb, sqrt_tbcrb, sqrt_ecrb, sqrt_mmse_theory] = bound_columns(cfg.a, n)?;
        rows.push(RmseRow {
            n,
            stats,
            sqrt_bcrb,
            sqrt_tbcrb,
            sqrt_ecrb,
            sqrt_mmse_theory,
        });
    }
    Ok(rows)
}

/// Raw per-trial records at one sample size, in trial order.
pub fn run_trials(cfg: &ExperimentConfig, n: u32) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let p = CaseParams::for_estimators(cfg.a, n)?;
    let ests = cfg.estimators.clone();
    Ok(collect_trials(cfg, &p, &|k: usize, t: f64| ests[k].estimate(&p, t)))
}

/// RMSE table over `cfg.n_list`. Identical for any worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RmseRow>> {
    let ests = cfg.estimators.clone();
    run_with(cfg, |p| {
        let p = *p;
        let ests = ests.clone();
        move |k: usize, t: f64| ests[k].estimate(&p, t)
    })
}

/// `N = 2^1, …, 2^13`.
pub fn fig1_n_list() -> Vec<u32> {
    (1..=13).map(|k| 1u32 << k).collect()
}

pub fn fig1_config(a: f64, trials: usize, seed: u64, workers: Option<usize>) -> ExperimentConfig {
    ExperimentConfig {
        a,
        n_list: fig1_n_list(),
        trials,
        seed,
        estimators: vec![Estimator::Map, Estimator::MmseQuadratureFallback, Estimator::Ml],
        workers,
    }
}

/// The RMSE-versus-N table of MAP, MMSE and ML with the bound columns.
pub fn reproduce_fig1(a: f64, trials: usize, seed: u64, workers: Option<usize>) -> Result<Vec<RmseRow>> {
    if !(a > 2.0) {
        return Err(Error::regime(format!("bound columns need a > 2, got a = {a}")));
    }
    run_experiment(&fig1_config(a, trials, seed, workers))
}

pub const CSV_HEADER: &str = "N,rmse_map,se_map,rmse_mmse,se_mmse,rmse_ml,se_ml,sqrt_bcrb,sqrt_tbcrb,sqrt_ecrb,sqrt_mmse_theory";

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".to_string()
    }
}

/// Renders rows in the fixed CSV schema; missing estimator columns are `nan`.
pub fn rows_to_csv(rows: &[RmseRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let pair = |s: Option<&EstimatorStats>| match s {
            Some(s) => format!("{},{}", fmt17(s.rmse), fmt17(s.se_rmse)),
            None => "nan,nan".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            pair(r.stat(Estimator::Map)),
            pair(r.mmse_stat()),
            pair(r.stat(Estimator::Ml)),
            fmt17(r.sqrt_bcrb),
            fmt17(r.sqrt_tbcrb),
            fmt17(r.sqrt_ecrb),
            fmt17(r.sqrt_mmse_theory)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn uniform_prior_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_prior(1.0, &mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
        let (m, v) = mean_var(&xs);
        let se_m = (v / 1e5).sqrt();
        assert!((m - 0.5).abs() < 3.0 * se_m, "{m}");
        // Var of (θ−1/2)² under U(0,1) is 1/180 − 1/144.
        let se_v = ((1.0 / 80.0 - 1.0 / 144.0) / 1e5f64).sqrt();
        assert!((v - 1.0 / 12.0).abs() < 3.0 * se_v, "{v}");
    }

    #[test]
    fn beta3_prior_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_prior(3.0, &mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
        let (_, v) = mean_var(&xs);
        let sq: Vec<f64> = xs.iter().map(|x| (x - 0.5) * (x - 0.5)).collect();
        let (_, vv) = mean_var(&sq);
        assert!((v - 1.0 / 28.0).abs() < 3.0 * (vv / 1e5).sqrt(), "{v}");
    }

    #[test]
    fn suffstat_chi_square_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (theta, n) = (0.5, 8);
        let ts: Vec<f64> = (0..100_000).map(|_| sample_suffstat(theta, n, &mut rng)).collect();
        let (m, v) = mean_var(&ts);
        assert!((m - 2.0).abs() < 3.0 * (v / 1e5).sqrt(), "{m}");
        let chi: Vec<f64> = ts.iter().map(|t| 2.0 * t / theta).collect();
        let (_, vc) = mean_var(&chi);
        // Var of the sample variance of χ²_8: (μ4 − σ⁴)/n with μ4 = 12N(N+4).
        let se = ((12.0 * 8.0 * 12.0 + 48.0 * 8.0 - 256.0) / 1e5f64).sqrt();
        assert!((vc - 16.0).abs() < 3.0 * se, "{vc}");
        assert!(sample_suffstat(0.0, 8, &mut rng) == 0.0);
    }

    #[test]
    fn sq_errors_are_exact() {
        let p = CaseParams::new(3.0, 8).unwrap();
        let ests = [Estimator::Map, Estimator::Ml, Estimator::Mmse];
        for i in 0..20 {
            let r = run_trial(&p, &ests, 9, i);
            for (e, s) in r.estimates.iter().zip(&r.sq_errors) {
                let e = e.unwrap();
                assert_eq!(s.unwrap(), (e - r.theta_true) * (e - r.theta_true));
            }
            assert_eq!(r.estimates[1].unwrap(), 2.0 * r.t / 8.0);
        }
    }

    fn small_cfg(workers: Option<usize>) -> ExperimentConfig {
        ExperimentConfig {
            a: 3.0,
            n_list: vec![4, 32],
            trials: 100,
            seed: 42,
            estimators: vec![Estimator::Map, Estimator::MmseQuadratureFallback, Estimator::Ml],
            workers,
        }
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let a = rows_to_csv(&run_experiment(&small_cfg(Some(1))).unwrap());
        let b = rows_to_csv(&run_experiment(&small_cfg(Some(3))).unwrap());
        let c = rows_to_csv(&run_experiment(&small_cfg(None)).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(a.starts_with(CSV_HEADER));
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn config_validation() {
        let mut c = small_cfg(None);
        c.trials = 99;
        assert!(matches!(run_experiment(&c), Err(Error::InvalidConfig(_))));
        let mut c = small_cfg(None);
        c.n_list = vec![8, 4];
        assert!(c.validate().is_err());
        let mut c = small_cfg(None);
        c.workers = Some(0);
        assert!(c.validate().is_err());
        let mut c = small_cfg(None);
        c.estimators.clear();
        assert!(c.validate().is_err());
        assert_eq!(Estimator::parse("map").unwrap(), Estimator::Map);
        assert!(Estimator::parse("median").is_err());
    }

    #[test]
    fn failure_share_threshold() {
        let mut cfg = small_cfg(None);
        cfg.trials = 2000;
        cfg.n_list = vec![4];
        cfg.estimators = vec![Estimator::Ml];
        // About 0.5% of trials fail when the injected limit is 5.
        let failing = |limit: u64| {
            move |_: &CaseParams| {
                move |_: usize, t: f64| {
                    if (t * 1e6) as u64 % 1000 < limit {
                        Err(Error::domain("injected"))
                    } else {
                        Ok(t)
                    }
                }
            }
        };
        let ok = run_with(&cfg, failing(0)).unwrap();
        assert_eq!(ok[0].stats[0].failed, 0);
        let err = run_with(&cfg, failing(5)).unwrap_err();
        assert!(matches!(err, Error::TooManyFailures { .. }), "{err:?}");
    }

    #[test]
    fn ml_mse_matches_ecrb() {
        let cfg = ExperimentConfig {
            a: 3.0,
            n_list: vec![8],
            trials: 4000,
            seed: 7,
            estimators: vec![Estimator::Ml],
            workers: None,
        };
        let row = &run_experiment(&cfg).unwrap()[0];
        let s = row.stat(Estimator::Ml).unwrap();
        assert!((s.mse - row.sqrt_ecrb.powi(2)).abs() < 3.0 * s.se_mse, "{s:?}");
        assert!(row.sqrt_bcrb <= row.sqrt_tbcrb && row.sqrt_tbcrb <= row.sqrt_mmse_theory);
    }

    #[test]
    fn csv_formatting() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(f64::NAN), "nan");
        let row = RmseRow {
            n: 2,
            stats: vec![],
            sqrt_bcrb: 1.0,
            sqrt_tbcrb: 1.0,
            sqrt_ecrb: 1.0,
            sqrt_mmse_theory: 1.0,
        };
        let csv = rows_to_csv(&[row]);
        assert_eq!(csv.lines().nth(1).unwrap(), "2,nan,nan,nan,nan,nan,nan,1.0000000000000000e0,1.0000000000000000e0,1.0000000000000000e0,1.0000000000000000e0");
    }
}
