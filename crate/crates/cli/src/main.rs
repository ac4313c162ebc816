//! `bayesbounds` command-line front end.
//!
//! Exit codes: 0 ok, 1 failed self-test or replay, 2 domain or usage error,
//! 3 numerical non-convergence, 4 I/O failure.

mod config;
mod selftest;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use bayesbounds::case_study::{ml_estimate, CaseParams, Method};
use bayesbounds::engine::{equality_check, phi_cr, tbcrb, Equality, XExpectation, INNER_TOL};
use bayesbounds::expfam::{posterior_quantile_grid, scalar_efficiency_test, EFFICIENCY_TOL};
use bayesbounds::model::{GaussianConjugate, JointModel};
use bayesbounds::montecarlo::{fmt17, reproduce_fig1, rows_to_csv, DEFAULT_SEED};
use bayesbounds::quadrature::Domain;
use bayesbounds::Error;

use config::{pick, require, FileConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Verify(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(
                Error::NonConvergent { .. }
                | Error::NonFiniteIntegrand { .. }
                | Error::SingularQ { .. }
                | Error::TooManyFailures { .. },
            ) => 3,
            CliError::Lib(_) | CliError::Usage(_) => 2,
            CliError::Io(_) => 4,
            CliError::Verify(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "bayesbounds", version, about = "Bayesian lower bounds on the MSE and the Gaussian-variance case study")]
struct Cli {
    /// TOML file whose keys mirror the long flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for Monte-Carlo runs. Never changes the output.
    #[arg(long, global = true, env = "BAYESBOUNDS_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    Bcrb,
    Tbcrb,
    Ecrb,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Map,
    Ml,
    Mmse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    CaseStudy,
    GaussianConjugate,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form BCRB, TBCRB and ECRB of the case study.
    Bounds {
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        #[arg(long = "N")]
        n: Option<u32>,
        #[arg(long, value_enum)]
        which: Option<Which>,
        /// Print CSV with 17 significant digits.
        #[arg(long)]
        csv: bool,
    },
    /// MAP, ML or MMSE estimate from the statistic t = xᵀx/2.
    Estimate {
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        #[arg(long = "N")]
        n: Option<u32>,
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        #[arg(long)]
        csv: bool,
    },
    /// RMSE of MAP, MMSE and ML against the bounds for N = 2..8192, as CSV.
    Fig1 {
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equality and efficiency diagnostics for a model.
    CheckEfficiency {
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        #[arg(long = "N")]
        n: Option<u32>,
        /// Summary values to probe (t for the case study, x̄ otherwise).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        probes: Option<Vec<f64>>,
        #[arg(long = "noise-var")]
        noise_var: Option<f64>,
        #[arg(long = "prior-mean", allow_negative_numbers = true)]
        prior_mean: Option<f64>,
        #[arg(long = "prior-var")]
        prior_var: Option<f64>,
    },
    /// Runs the oracle suites of every module.
    Selftest {
        #[arg(long, hide = true, default_value_t = 0.0)]
        inject_bfim_error: f64,
    },
    /// Re-runs the command recorded in a manifest and compares checksums.
    Replay { manifest: PathBuf },
}

/// Six significant digits.
fn fmt6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let e = v.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        format!("{:.*}", (5 - e) as usize, v)
    } else {
        format!("{v:.5e}")
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let workers = cli.workers.or(file.workers);
    if workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    match cli.command {
        Command::Bounds { a, n, which, csv } => {
            let which = match which {
                Some(w) => w,
                None => match file.which.as_deref() {
                    Some(s) => Which::from_str(s, true).map_err(CliError::Usage)?,
                    None => Which::All,
                },
            };
            cmd_bounds(require(a, file.a, "a")?, require(n, file.n, "N")?, which, csv)
        }
        Command::Estimate { a, n, t, estimator, csv } => {
            let est = match estimator {
                Some(e) => e,
                None => EstimatorArg::from_str(&require(None, file.estimator.clone(), "estimator")?, true)
                    .map_err(CliError::Usage)?,
            };
            cmd_estimate(require(a, file.a, "a")?, require(n, file.n, "N")?, require(t, file.t, "t")?, est, csv)
        }
        Command::Fig1 { a, trials, seed, out } => {
            let params = Fig1Params {
                a: pick(a, file.a, 3.0),
                trials: pick(trials, file.trials, 20_000),
                seed: pick(seed, file.seed, DEFAULT_SEED),
            };
            let out = require(out, file.out.clone().map(PathBuf::from), "out")?;
            cmd_fig1(&params, &out, workers)
        }
        Command::CheckEfficiency {
            model,
            a,
            n,
            probes,
            noise_var,
            prior_mean,
            prior_var,
        } => {
            let model = match model {
                Some(m) => m,
                None => ModelArg::from_str(&require(None, file.model.clone(), "model")?, true).map_err(CliError::Usage)?,
            };
            let probes = probes.or(file.probes.clone());
            match model {
                ModelArg::CaseStudy => cmd_check_case(require(a, file.a, "a")?, require(n, file.n, "N")?, probes),
                ModelArg::GaussianConjugate => cmd_check_gaussian(
                    pick(n, file.n, 4),
                    pick(noise_var, file.noise_var, 1.0),
                    pick(prior_mean, file.prior_mean, 0.0),
                    pick(prior_var, file.prior_var, 1.0),
                    probes,
                ),
            }
        }
        Command::Selftest { inject_bfim_error } => Ok(if selftest::run(selftest::Faults { bfim: inject_bfim_error }) {
            0
        } else {
            1
        }),
        Command::Replay { manifest } => cmd_replay(&manifest, workers),
    }
}

fn cmd_bounds(a: f64, n: u32, which: Which, csv: bool) -> Result<u8, CliError> {
    let p = CaseParams::new(a, n)?;
    let mut rows: Vec<(&str, f64, f64)> = Vec::new();
    if matches!(which, Which::Bcrb | Which::All) {
        rows.push(("bcrb", p.bcrb()?, 0.0));
    }
    if matches!(which, Which::Tbcrb | Which::All) {
        let tb = p.tbcrb(Method::ClosedForm)?;
        rows.push(("tbcrb", tb.value, tb.err_est));
    }
    if matches!(which, Which::Ecrb | Which::All) {
        rows.push(("ecrb", p.ecrb(), 0.0));
    }
    if csv {
        println!("bound,value,sqrt_value,err_est");
        for (name, v, e) in rows {
            println!("{name},{},{},{}", fmt17(v), fmt17(v.sqrt()), fmt17(e));
        }
    } else {
        println!("a = {}, N = {n}", fmt6(a));
        for (name, v, e) in rows {
            println!("{name:<6} {:<12} sqrt {:<12} err {}", fmt6(v), fmt6(v.sqrt()), fmt6(e));
        }
    }
    Ok(0)
}

fn cmd_estimate(a: f64, n: u32, t: f64, est: EstimatorArg, csv: bool) -> Result<u8, CliError> {
    let p = CaseParams::for_estimators(a, n)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(CliError::Lib(Error::Domain(format!("t must be finite and non-negative, got {t}"))));
    }
    let gamma = 2.0 * t / f64::from(n);
    let (name, v) = match est {
        EstimatorArg::Map => ("map", p.map_estimate(gamma)?),
        EstimatorArg::Ml => ("ml", ml_estimate(gamma)),
        EstimatorArg::Mmse => ("mmse", p.mmse_estimate_checked(t)?.value),
    };
    if csv {
        println!("estimator,gamma,estimate");
        println!("{name},{},{}", fmt17(gamma), fmt17(v));
    } else {
        println!("{name} {}", fmt6(v));
    }
    Ok(0)
}

struct Fig1Params {
    a: f64,
    trials: usize,
    seed: u64,
}

fn fig1_csv(p: &Fig1Params, workers: Option<usize>) -> Result<String, CliError> {
    Ok(rows_to_csv(&reproduce_fig1(p.a, p.trials, p.seed, workers)?))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn cmd_fig1(p: &Fig1Params, out: &Path, workers: Option<usize>) -> Result<u8, CliError> {
    let start = Instant::now();
    let csv = fig1_csv(p, workers)?;
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", out.display()));
    std::fs::write(out, &csv).map_err(io)?;
    let mut m = String::new();
    let _ = writeln!(m, "command=fig1");
    let _ = writeln!(m, "a={}", fmt17(p.a));
    let _ = writeln!(m, "trials={}", p.trials);
    let _ = writeln!(m, "seed={}", p.seed);
    let _ = writeln!(m, "version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "output={}", out.file_name().map(|s| s.to_string_lossy()).unwrap_or_default());
    let _ = writeln!(m, "wall_time_s={:.3}", start.elapsed().as_secs_f64());
    let _ = writeln!(m, "sha256={}", sha256_hex(csv.as_bytes()));
    std::fs::write(manifest_path(out), m).map_err(io)?;
    println!("wrote {} rows to {}", csv.lines().count() - 1, out.display());
    Ok(0)
}

fn cmd_replay(manifest: &Path, workers: Option<usize>) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(manifest).map_err(|e| CliError::Io(format!("{}: {e}", manifest.display())))?;
    let kv: BTreeMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| CliError::Usage(format!("manifest lacks {k}")));
    let bad = |k: &str| CliError::Usage(format!("manifest has an invalid {k}"));
    if get("command")? != "fig1" {
        return Err(CliError::Usage(format!("cannot replay command {}", get("command")?)));
    }
    let p = Fig1Params {
        a: get("a")?.parse().map_err(|_| bad("a"))?,
        trials: get("trials")?.parse().map_err(|_| bad("trials"))?,
        seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
    };
    let digest = sha256_hex(fig1_csv(&p, workers)?.as_bytes());
    if digest == get("sha256")? {
        println!("replay matches sha256 {digest}");
        Ok(0)
    } else {
        Err(CliError::Verify(format!("replay checksum {digest} differs from manifest {}", get("sha256")?)))
    }
}

/// Per-probe efficiency deviations and the equality verdict.
fn efficiency_rows<M: JointModel>(m: &M, probes: &[f64], support: Domain) -> Result<(Vec<f64>, bool, Equality), CliError> {
    let mut devs = Vec::new();
    let mut all = true;
    for &s in probes {
        let x = [s];
        let grid = posterior_quantile_grid(|th| m.log_joint(&x, th), support, 64)?;
        let r = scalar_efficiency_test(|th| m.score(&x, th), |th| th, &grid, EFFICIENCY_TOL)?;
        all &= r.is_efficient;
        devs.push(r.deviation);
    }
    let xs: Vec<Vec<f64>> = probes.iter().map(|&s| vec![s]).collect();
    let eq = equality_check(m, &phi_cr(m), &xs, 1e-9)?;
    Ok((devs, all, eq.verdict))
}

fn print_efficiency(probes: &[f64], devs: &[f64], verdict: Equality) {
    println!("equality check: {}", if verdict == Equality::Equal { "equal" } else { "depends on x" });
    for (s, d) in probes.iter().zip(devs) {
        println!("probe {:<12} deviation {}", fmt6(*s), fmt6(*d));
    }
    println!("max deviation {}", fmt6(devs.iter().copied().fold(0.0, f64::max)));
}

fn cmd_check_case(a: f64, n: u32, probes: Option<Vec<f64>>) -> Result<u8, CliError> {
    let p = CaseParams::new(a, n)?;
    let m = bayesbounds::case_study::CaseModel::new(p);
    // γ = 2t/N at 0.3, 0.5 and 0.7 by default.
    let half = 0.5 * f64::from(n);
    let probes = probes.unwrap_or_else(|| vec![0.3 * half, 0.5 * half, 0.7 * half]);
    let (devs, efficient, verdict) = efficiency_rows(&m, &probes, Domain::Finite { lo: 0.0, hi: 1.0 })?;
    print_efficiency(&probes, &devs, verdict);
    let tb = p.tbcrb(Method::ClosedForm)?.value;
    let b = p.bcrb()?;
    println!("TBCRB {}  BCRB {}  gap {}", fmt6(tb), fmt6(b), fmt6(tb - b));
    let rel_gap = (tb - b) / b;
    let summary = match (efficient, rel_gap > 1e-6) {
        (true, false) => "efficient; TBCRB=BCRB",
        (true, true) => "efficient; TBCRB>BCRB",
        (false, true) => "not efficient; TBCRB>BCRB",
        (false, false) => "not efficient; TBCRB=BCRB",
    };
    println!("{summary}");
    Ok(0)
}

fn cmd_check_gaussian(n: u32, noise_var: f64, prior_mean: f64, prior_var: f64, probes: Option<Vec<f64>>) -> Result<u8, CliError> {
    let m = GaussianConjugate::new(n, noise_var, prior_mean, prior_var)?;
    let probes = probes.unwrap_or_else(|| vec![prior_mean - 1.0, prior_mean, prior_mean + 2.0]);
    let (devs, efficient, verdict) = efficiency_rows(&m, &probes, Domain::Real)?;
    print_efficiency(&probes, &devs, verdict);
    let lm = |s: f64| m.log_marginal(s);
    let ex = XExpectation::Quadrature {
        domain: Domain::Real,
        log_marginal: Some(&lm),
        hint: Some(prior_mean),
        rel_tol: 1e-10,
    };
    let b = tbcrb(&m, &ex, INNER_TOL)?;
    let (tb, bc, mmse) = (b.tighter.scalar(), b.classical.scalar(), m.posterior_var());
    println!("TBCRB {}  BCRB {}  MMSE {}", fmt6(tb), fmt6(bc), fmt6(mmse));
    let same = |x: f64, y: f64| ((x - y) / y).abs() < 1e-8;
    let bounds = if same(tb, bc) && same(tb, mmse) {
        "TBCRB=BCRB=MMSE"
    } else if same(tb, bc) {
        "TBCRB=BCRB"
    } else {
        "TBCRB>BCRB"
    };
    println!("{}; {bounds}", if efficient { "efficient" } else { "not efficient" });
    Ok(0)
}
