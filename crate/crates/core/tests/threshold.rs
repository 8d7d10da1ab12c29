use fnls_core::threshold::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[test]
fn margin_examples_are_exact() {
    assert_eq!(constraint_margin_exact(&rat(6, 5)), rat(2, 25));
    assert_eq!(constraint_margin_exact(&rat(11, 10)), rat(-37, 800));
    assert!((constraint_margin(1.2) - 0.08).abs() < 1e-15);
    assert!((constraint_margin(1.1) + 0.04625).abs() < 1e-15);
}

#[test]
fn alpha0_three_ways() {
    let closed = alpha0();
    assert!((closed - alpha0_from_quadratic()).abs() < 1e-12);
    assert!((closed - margin_root(1.05, 1.125).unwrap()).abs() < 1e-12);
    assert_eq!(format!("{closed:.3}"), "1.124");
    assert!(constraint_margin(closed).abs() < 1e-14);
}

#[test]
fn margin_quadratic_form_on_lower_branch() {
    for i in 1..25 {
        let a = rat(i, 200);
        let alpha = rat(1, 1) + a.clone();
        let quad = (rat(-7, 1) * &a * &a + rat(17, 1) * &a - rat(2, 1)) / rat(8, 1);
        assert_eq!(constraint_margin_exact(&alpha), quad, "a = {a}");
    }
}

#[test]
fn margin_root_needs_a_bracket() {
    assert!(margin_root(1.2, 1.5).is_err());
}

proptest! {
    #[test]
    fn margin_increasing_on_window(x in 1.05f64..1.125, y in 1.05f64..1.125) {
        prop_assume!(x < y);
        prop_assert!(constraint_margin(x) < constraint_margin(y));
    }

    #[test]
    fn margin_continuous_on_window(x in 1.05f64..1.125, h in 1e-9f64..1e-6) {
        // Lipschitz constant of the quadratic branch is below 17/8
        prop_assert!((constraint_margin(x + h) - constraint_margin(x)).abs() <= 2.2 * h);
    }

    #[test]
    fn float_margin_matches_exact(n in 1001i64..1999) {
        let exact = constraint_margin_exact(&rat(n, 1000));
        let approx = constraint_margin(n as f64 / 1000.0);
        let e: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
        prop_assert!((e - approx).abs() < 1e-14);
    }

    #[test]
    fn series_arithmetic_matches_evaluation(
        a in prop::collection::vec((-3i64..4, 0i64..6), 1..4),
        b in prop::collection::vec((-3i64..4, 0i64..6), 1..4),
        sigma in 0.2f64..0.9,
    ) {
        let build = |t: &[(i64, i64)]| t.iter().fold(SigmaSeries::zero(), |acc, &(c, e)| acc + SigmaSeries::monomial(c, 1, e));
        let (x, y) = (build(&a), build(&b));
        let (fx, fy) = (x.eval(sigma), y.eval(sigma));
        prop_assert!(((x.clone() + y.clone()).eval(sigma) - (fx + fy)).abs() < 1e-9);
        prop_assert!(((x.clone() - y.clone()).eval(sigma) - (fx - fy)).abs() < 1e-9);
        prop_assert!(((x * y).eval(sigma) - fx * fy).abs() < 1e-9);
    }
}

#[test]
fn reciprocal_times_series_is_one() {
    let q = NumericHierarchy::new(rat(6, 5)).q_prime().unwrap();
    let back =
        (q * (SigmaSeries::monomial(1, 1, 0) - SigmaSeries::monomial(1, 1, 50))) - SigmaSeries::monomial(1, 1, 0);
    // only truncation terms beyond the retained order survive
    assert!(back.leading_exponent().is_none_or(|e| e > SERIES_ORDER));
    let x = SigmaSeries::monomial(3, 1, -7) + SigmaSeries::monomial(2, 1, 1);
    let one = x.clone() * x.recip().unwrap();
    assert_eq!(one.leading(), Some((0, &rat(1, 1))));
    assert!(one.eval(0.5).is_finite());
}

#[test]
fn hierarchy_holds_at_six_fifths() {
    let report = hierarchy_checks(&NumericHierarchy::new(rat(6, 5))).unwrap();
    for c in &report.checks {
        assert!(c.passed, "{}: {}", c.name, c.witness);
    }
    assert_eq!(report.checks.len(), 8);
}

#[test]
fn hierarchy_examples() {
    let h = NumericHierarchy::new(rat(6, 5));
    assert_eq!((h.b.clone() - h.b0.clone()).to_string(), "σ^200");
    let gap = h.eps1.clone()
        - SigmaSeries::monomial(100, 1, 0) * (SigmaSeries::monomial(3, 1, 200) + h.q_inv.clone() + h.theta.clone());
    assert_eq!(gap.leading_exponent(), Some(2));
    assert_eq!(gap.sign(), 1);
    assert_eq!(h.kappa.leading_exponent(), Some(-500));
    assert_eq!(h.nu.to_string(), "1/5 - σ^1");
    assert_eq!(h.s.to_string(), "1/5 + σ^1");
}

#[test]
fn corrupted_b1_is_reported() {
    let mut h = NumericHierarchy::new(rat(6, 5));
    h.b1 = SigmaSeries::monomial(1, 2, 0) + SigmaSeries::monomial(1, 1, 200);
    let report = hierarchy_checks(&h).unwrap();
    assert!(!report.passed());
    assert!(report.violations().iter().any(|c| c.name == "b < b1"));
}

#[test]
fn hierarchy_fails_below_threshold() {
    let report = hierarchy_checks(&NumericHierarchy::new(rat(11, 10))).unwrap();
    let names: Vec<&str> = report.violations().iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["(alpha-1)+2s*nu-s > 0"]);
}
