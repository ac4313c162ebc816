//! Oracle checks run by `selftest`.

use std::time::Instant;

use bayesbounds::case_study::{CaseModel, CaseParams, Method};
use bayesbounds::engine::{equality_check, phi_cr, tbcrb, tblb, Equality, XExpectation, INNER_TOL};
use bayesbounds::expfam::{conjugate_update, posterior_quantile_grid, scalar_efficiency_test, ConjugateHyper, EFFICIENCY_TOL};
use bayesbounds::model::{GaussianConjugate, JointModel};
use bayesbounds::montecarlo::{rows_to_csv, run_experiment, Estimator, ExperimentConfig};
use bayesbounds::quadrature::{integrate, integrate_log, Domain};
use bayesbounds::special::{log_beta, log_gamma, log_tilted_beta_integral, whittaker_w_log, WhittakerArgs};

type CheckResult = Result<(), String>;

/// Deliberate faults, for checking that the suite notices them.
#[derive(Debug, Clone, Copy, Default)]
pub struct Faults {
    /// Relative error added to the closed-form Bayesian information.
    pub bfim: f64,
}

fn close(name: &str, got: f64, want: f64, rel: f64) -> CheckResult {
    if ((got - want) / want).abs() <= rel {
        Ok(())
    } else {
        Err(format!("{name}: got {got:e}, expected {want:e} (rel tol {rel:e})"))
    }
}

fn lib<T>(r: bayesbounds::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn special() -> CheckResult {
    close("log_gamma(3)", lib(log_gamma(3.0))?, 2f64.ln(), 1e-13)?;
    close("log_gamma(1/2)", lib(log_gamma(0.5))?, 0.5 * std::f64::consts::PI.ln(), 1e-13)?;
    close("log_beta(3,3)", lib(log_beta(3.0, 3.0))?, (1.0f64 / 30.0).ln(), 1e-13)?;
    close(
        "W elementary",
        lib(whittaker_w_log(WhittakerArgs::new(1.0, 0.5, 2.0)))?,
        (2.0 * (-1.0f64).exp()).ln(),
        1e-12,
    )?;
    for (a, n, t) in [(2.5, 2u32, 0.1), (3.0, 8, 1.0), (4.0, 64, 20.0)] {
        let nu = a - 0.5 * f64::from(n);
        let closed = lib(log_tilted_beta_integral(nu, a, t))?;
        let direct = lib(integrate_log(
            |th: f64| (nu - 1.0) * th.ln() + (a - 1.0) * (-th).ln_1p() - t / th,
            Domain::Finite { lo: 0.0, hi: 1.0 },
            None,
            1e-13,
        ))?
        .log_value;
        close(&format!("GR identity a={a} N={n} t={t}"), closed.exp(), direct.exp(), 1e-8)?;
    }
    Ok(())
}

fn quadrature() -> CheckResult {
    let beta = lib(integrate(
        |x| x * x * (1.0 - x) * (1.0 - x),
        Domain::Finite { lo: 0.0, hi: 1.0 },
        1e-12,
        0.0,
    ))?;
    close("beta(3,3) integral", beta.value, 1.0 / 30.0, 1e-12)?;
    let gauss = lib(integrate(|x| (-0.5 * x * x).exp(), Domain::Real, 1e-12, 0.0))?;
    close("Gaussian integral", gauss.value, (2.0 * std::f64::consts::PI).sqrt(), 1e-10)
}

fn case_study(faults: Faults) -> CheckResult {
    let p16 = lib(CaseParams::new(3.0, 16))?;
    close("BCRB a=3 N=16", lib(p16.bcrb())?, 1.0 / 120.0, 1e-14)?;
    close("ECRB a=3 N=100", lib(CaseParams::new(3.0, 100))?.ecrb(), 4.0 / 700.0, 1e-14)?;
    let p = lib(CaseParams::new(3.0, 8))?;
    let m = CaseModel::new(p);
    let ex = XExpectation::Quadrature {
        domain: Domain::SemiInfinite { lo: 0.0 },
        log_marginal: None,
        hint: Some(2.0),
        rel_tol: 1e-9,
    };
    let nested = lib(tblb(&m, &phi_cr(&m), &ex, INNER_TOL))?.moments.q[(0, 0)];
    let closed = lib(p.bfim())? * (1.0 + faults.bfim);
    close("BFIM closed form vs nested quadrature", closed, nested, 1e-6)?;
    let tb = lib(p.tbcrb(Method::ClosedForm))?.value;
    close("TBCRB closed form vs engine", lib(p.tbcrb(Method::Engine))?.value, tb, 1e-5)?;
    let mmse = lib(p.mmse_value(Method::Quadrature))?.value;
    close("MMSE closed form vs quadrature", lib(p.mmse_value(Method::ClosedForm))?.value, mmse, 1e-6)?;
    if !(mmse > tb && tb > lib(p.bcrb())?) {
        return Err("ordering MMSE > TBCRB > BCRB at N=8".into());
    }
    Ok(())
}

fn engine_and_expfam() -> CheckResult {
    let m = lib(GaussianConjugate::new(4, 1.0, 0.0, 1.0))?;
    let lm = |s: f64| m.log_marginal(s);
    let ex = XExpectation::Quadrature {
        domain: Domain::Real,
        log_marginal: Some(&lm),
        hint: Some(0.0),
        rel_tol: 1e-10,
    };
    let b = lib(tbcrb(&m, &ex, INNER_TOL))?;
    close("Gaussian TBCRB", b.tighter.scalar(), 0.2, 1e-8)?;
    close("Gaussian BCRB", b.classical.scalar(), 0.2, 1e-8)?;
    let probes = vec![vec![-1.0], vec![1.0]];
    if lib(equality_check(&m, &phi_cr(&m), &probes, 1e-9))?.verdict != Equality::Equal {
        return Err("Gaussian equality check".into());
    }
    let x = [0.5];
    let grid = lib(posterior_quantile_grid(|t| m.log_joint(&x, t), Domain::Real, 64))?;
    let r = lib(scalar_efficiency_test(|t| m.score(&x, t), |t| t, &grid, EFFICIENCY_TOL))?;
    if !r.is_efficient {
        return Err(format!("Gaussian efficiency: {r:?}"));
    }
    let h = lib(conjugate_update(&ConjugateHyper::new(2.0, vec![1.0, 0.0]), &[0.0, 0.0]))?;
    if h != ConjugateHyper::new(3.0, vec![1.0, 0.0]) {
        return Err("conjugate update".into());
    }
    Ok(())
}

fn montecarlo() -> CheckResult {
    let cfg = |workers| ExperimentConfig {
        a: 3.0,
        n_list: vec![8, 64],
        trials: 2000,
        seed: 3,
        estimators: vec![Estimator::Ml, Estimator::Map],
        workers: Some(workers),
    };
    let rows = lib(run_experiment(&cfg(1)))?;
    if rows_to_csv(&rows) != rows_to_csv(&lib(run_experiment(&cfg(2)))?) {
        return Err("worker count changed the output".into());
    }
    for r in &rows {
        let s = r.stat(Estimator::Ml).ok_or("missing ML column")?;
        let z = (s.mse - r.sqrt_ecrb.powi(2)) / s.se_mse;
        if z.abs() > 4.0 {
            return Err(format!("ML MSE vs ECRB at N={}: z = {z:.2}", r.n));
        }
    }
    Ok(())
}

/// Runs every suite, printing one line each. Returns whether all passed.
pub fn run(faults: Faults) -> bool {
    let suites: [(&str, Box<dyn Fn() -> CheckResult>); 5] = [
        ("special-fn", Box::new(special)),
        ("quadrature", Box::new(quadrature)),
        ("case-study", Box::new(move || case_study(faults))),
        ("engine/expfam", Box::new(engine_and_expfam)),
        ("monte-carlo", Box::new(montecarlo)),
    ];
    let mut ok = true;
    for (name, f) in &suites {
        let start = Instant::now();
        let r = f();
        let dt = start.elapsed().as_secs_f64();
        match r {
            Ok(()) => println!("PASS {name:<14} {dt:.2}s"),
            Err(e) => {
                ok = false;
                println!("FAIL {name:<14} {dt:.2}s  {e}");
            }
        }
    }
    println!("{}", if ok { "selftest passed" } else { "selftest FAILED" });
    ok
}
