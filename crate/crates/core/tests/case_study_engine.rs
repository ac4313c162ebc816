use bayesbounds::case_study::{CaseModel, CaseParams};
use bayesbounds::engine::{
    centered_g, equality_check, phi_cr, tblb, wwf_membership, BzPhi, Equality, XExpectation, INNER_TOL,
};
use bayesbounds::model::{validate_model, JointModel};
use bayesbounds::montecarlo::{run_trial, Estimator};
use bayesbounds::quadrature::{integrate_log, Domain};

fn model(a: f64, n: u32) -> CaseModel {
    CaseModel::new(CaseParams::new(a, n).unwrap())
}

#[test]
fn case_model_validates() {
    let m = model(3.0, 8);
    let probes: Vec<(Vec<f64>, f64)> = [0.5, 2.0, 6.0]
        .iter()
        .flat_map(|&t| [0.1, 0.4, 0.8].map(|th| (vec![t], th)))
        .collect();
    let r = validate_model(&m, &phi_cr(&m), &probes);
    assert!(r.passed(), "{r:?}");
    let bz = BzPhi::new(&m, vec![0.05, 0.2]).unwrap();
    let r = validate_model(&m, &bz, &probes);
    assert!(r.passed(), "{r:?}");
}

#[test]
fn joint_integrates_to_marginal() {
    for (n, t) in [(2u32, 0.3), (8, 2.0), (64, 12.0), (1024, 200.0)] {
        let m = model(3.0, n);
        let x = [t];
        let r = integrate_log(|th| m.log_joint(&x, th), m.theta_support(&x), m.mode_hint(&x), 1e-12).unwrap();
        let lm = m.params.log_marginal_t(t).unwrap();
        assert!((r.log_value - lm).exp_m1().abs() < 1e-8, "N = {n}, t = {t}");
    }
}

#[test]
fn score_gain_depends_on_x() {
    let m = model(3.0, 8);
    let probes = vec![vec![0.5], vec![2.0], vec![8.0]];
    let r = equality_check(&m, &phi_cr(&m), &probes, 1e-6).unwrap();
    assert_eq!(r.verdict, Equality::DependsOnX, "{r:?}");
    assert!(r.max_deviation > 1e-3);
}

#[test]
fn score_family_has_zero_posterior_mean() {
    let m = model(3.0, 8);
    let probes = vec![vec![0.5], vec![2.0], vec![8.0]];
    let r = wwf_membership(&m, &phi_cr(&m), &probes, 1e-7).unwrap();
    assert!(r.passed, "{r:?}");
    let theta = bayesbounds::model::FnPhi::new(1, |_: &[f64], t: f64, out: &mut [f64]| out[0] = t);
    assert!(!wwf_membership(&m, &theta, &probes, 1e-6).unwrap().passed);
}

#[test]
fn tighter_bound_dominates_on_sampled_observations() {
    let m = model(3.0, 8);
    let ex = XExpectation::MonteCarlo {
        sampler: &m,
        draws: 100,
        seed: 5,
        partitions: 2,
    };
    let b = tblb(&m, &phi_cr(&m), &ex, INNER_TOL).unwrap();
    assert!(b.tighter.scalar() > b.classical.scalar());
}

#[test]
fn bz_second_moment_diverges() {
    // p(θ+h|x)² / p(θ|x) grows like e^{t/θ} as θ → 0, so E[φ²|x] is infinite
    // and the engine must refuse rather than return a number.
    let m = model(3.0, 8);
    let bz = BzPhi::new(&m, vec![0.05]).unwrap();
    let xs = vec![vec![0.5], vec![2.0]];
    let r = tblb(&m, &bz, &XExpectation::Grid { xs: &xs, weights: &[0.5, 0.5] }, INNER_TOL);
    assert!(r.is_err(), "{r:?}");
}

#[test]
fn centered_g_gives_posterior_variance() {
    let m = model(3.0, 8);
    let xs = vec![vec![0.7], vec![2.0], vec![5.0]];
    let w = [0.3, 0.5, 0.2];
    let b = tblb(&m, &centered_g(&m, 1e-12), &XExpectation::Grid { xs: &xs, weights: &w }, INNER_TOL).unwrap();
    let expect: f64 = xs
        .iter()
        .zip(&w)
        .map(|(x, w)| w * m.params.posterior_var_quadrature(x[0]).unwrap())
        .sum();
    assert!((b.tighter.scalar() / expect - 1.0).abs() < 1e-8);
    assert!((b.classical.scalar() / expect - 1.0).abs() < 1e-8);
}

#[test]
fn map_approaches_ml() {
    let ests = [Estimator::Map, Estimator::Ml];
    let medians: Vec<f64> = [64u32, 256, 1024, 4096]
        .iter()
        .map(|&n| {
            let p = CaseParams::new(3.0, n).unwrap();
            let mut rel: Vec<f64> = (0..1000)
                .map(|i| {
                    let r = run_trial(&p, &ests, 17, i);
                    let (map, ml) = (r.estimates[0].unwrap(), r.estimates[1].unwrap());
                    (map - ml).abs() / ml
                })
                .collect();
            rel.sort_by(f64::total_cmp);
            0.5 * (rel[499] + rel[500])
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
    assert!(medians[3] < 0.01, "{medians:?}");
}

#[test]
fn map_is_stationary() {
    let p = CaseParams::new(3.0, 16).unwrap();
    for t in [0.5, 4.0, 9.0] {
        let th = p.map_estimate(2.0 * t / 16.0).unwrap();
        assert!(th > 0.0 && th < 1.0);
        let h = 1e-6;
        let d = (p.log_joint_t(th + h, t) - p.log_joint_t(th - h, t)) / (2.0 * h);
        assert!(d.abs() < 1e-6 * (1.0 + p.score(0.5 * th, t).abs()), "t = {t}: {d:e}");
    }
}

#[test]
fn support_is_the_unit_interval() {
    let m = model(3.0, 8);
    assert_eq!(m.theta_support(&[1.0]), Domain::Finite { lo: 0.0, hi: 1.0 });
}
