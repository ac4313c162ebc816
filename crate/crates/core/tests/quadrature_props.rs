use bayesbounds::quadrature::{integrate, Domain};
use proptest::prelude::*;

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Exact integral of a polynomial over `[lo, hi]`.
fn poly_integral(c: &[f64], lo: f64, hi: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(k, &ck)| {
            let p = (k + 1) as i32;
            ck * (hi.powi(p) - lo.powi(p)) / f64::from(p)
        })
        .sum()
}

proptest! {
    #[test]
    fn linearity(
        f in prop::collection::vec(-3.0f64..3.0, 1..8),
        g in prop::collection::vec(-3.0f64..3.0, 1..8),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        lo in -2.0f64..1.0,
        width in 0.1f64..3.0,
    ) {
        let tol = 1e-10;
        let d = Domain::finite(lo, lo + width).unwrap();
        let lhs = integrate(|x| alpha * poly(&f, x) + beta * poly(&g, x), d, tol, 1e-13).unwrap();
        let rf = integrate(|x| poly(&f, x), d, tol, 1e-13).unwrap();
        let rg = integrate(|x| poly(&g, x), d, tol, 1e-13).unwrap();
        let rhs = alpha * rf.value + beta * rg.value;
        let scale = alpha.abs() * rf.value.abs() + beta.abs() * rg.value.abs() + 1.0;
        prop_assert!((lhs.value - rhs).abs() <= 10.0 * tol * scale, "{} vs {}", lhs.value, rhs);
        let exact = alpha * poly_integral(&f, lo, lo + width) + beta * poly_integral(&g, lo, lo + width);
        prop_assert!((lhs.value - exact).abs() <= 10.0 * tol * scale);
    }

    #[test]
    fn split_additivity(lo in -3.0f64..0.0, c in 0.05f64..0.95, width in 0.5f64..4.0, k in 0.5f64..4.0) {
        let f = |x: f64| (k * x).sin() * (-0.3 * x * x).exp() + 1.0 / (1.0 + x * x);
        let hi = lo + width;
        let mid = lo + c * width;
        let whole = integrate(f, Domain::finite(lo, hi).unwrap(), 1e-11, 1e-14).unwrap();
        let left = integrate(f, Domain::finite(lo, mid).unwrap(), 1e-11, 1e-14).unwrap();
        let right = integrate(f, Domain::finite(mid, hi).unwrap(), 1e-11, 1e-14).unwrap();
        let gap = (whole.value - left.value - right.value).abs();
        prop_assert!(gap <= whole.err_est + left.err_est + right.err_est + 4.0 * f64::EPSILON * whole.value.abs(),
            "gap {gap:e}, errs {:e} {:e} {:e}", whole.err_est, left.err_est, right.err_est);
    }
}
