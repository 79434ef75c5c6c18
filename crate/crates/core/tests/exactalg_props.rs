use betti_core::exactalg::rat;
use betti_core::{AlgebraError, Poly, Precision, RatFun};
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;

fn poly_strategy(max_deg: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec((-6i64..=6, 1i64..=3), 0..=max_deg + 1).prop_map(|c| {
        Poly::from_coeffs(
            c.into_iter()
                .map(|(p, q)| BigRational::new(p.into(), q.into()))
                .collect(),
        )
    })
}

fn ratfun_strategy() -> impl Strategy<Value = RatFun> {
    (poly_strategy(3), poly_strategy(2))
        .prop_filter("nonzero denominator", |(_, d)| !d.is_zero())
        .prop_map(|(n, d)| RatFun::new(n, d).unwrap())
}

fn is_normal(f: &RatFun) -> bool {
    let monic = f.den().leading().is_some_and(|c| *c == rat(1, 1));
    monic && f.num().gcd(f.den()).is_constant()
}

proptest! {
    #[test]
    fn degree_is_subadditive(f in ratfun_strategy(), g in ratfun_strategy()) {
        let d = (&f * &g).degree();
        prop_assert!(d <= f.degree() + g.degree());
        // no cancellation possible: equality
        if !f.is_zero() && !g.is_zero()
            && f.num().gcd(g.den()).is_constant()
            && g.num().gcd(f.den()).is_constant()
            && (f.num().degree_or_zero() >= f.den().degree_or_zero()) == (g.num().degree_or_zero() >= g.den().degree_or_zero())
        {
            prop_assert_eq!(d, f.degree() + g.degree());
        }
    }

    #[test]
    fn arithmetic_results_are_normal_forms(f in ratfun_strategy(), g in ratfun_strategy()) {
        let mut results = vec![&f + &g, &f - &g, &f * &g];
        if !g.is_zero() {
            results.push(f.checked_div(&g).unwrap());
        }
        for h in results {
            prop_assert!(is_normal(&h));
            let again = RatFun::new(h.num().clone(), h.den().clone()).unwrap();
            prop_assert_eq!(again, h);
        }
    }

    #[test]
    fn field_identities(f in ratfun_strategy(), g in ratfun_strategy(), h in ratfun_strategy()) {
        prop_assert_eq!(&(&f + &g) - &g, f.clone());
        prop_assert_eq!(&f * &(&g + &h), &(&f * &g) + &(&f * &h));
        if !g.is_zero() {
            prop_assert_eq!((&f * &g).checked_div(&g).unwrap(), f.clone());
        }
    }

    #[test]
    fn eval_is_pointwise_homomorphism(f in ratfun_strategy(), g in ratfun_strategy(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let z = Complex64::new(re, im);
        let (Ok(a), Ok(b), Ok(ab), Ok(s)) = (
            f.eval(z, Precision::Double),
            g.eval(z, Precision::Double),
            (&f * &g).eval(z, Precision::Double),
            (&f + &g).eval(z, Precision::Double),
        ) else {
            return Ok(());
        };
        prop_assume!(a.norm() < 1e6 && b.norm() < 1e6);
        let scale = 1.0 + a.norm() * b.norm();
        prop_assert!((ab - a * b).norm() <= 1e-9 * scale);
        prop_assert!((s - a - b).norm() <= 1e-9 * (1.0 + a.norm() + b.norm()));
    }

    #[test]
    fn division_with_remainder(a in poly_strategy(5), b in poly_strategy(3)) {
        prop_assume!(!b.is_zero());
        let (q, r) = a.div_rem(&b).unwrap();
        prop_assert_eq!(&(&q * &b) + &r, a);
        prop_assert!(r.is_zero() || r.degree() < b.degree());
    }
}

fn rf(num: &[i64], den: &[i64]) -> RatFun {
    RatFun::new(Poly::from_i64s(num), Poly::from_i64s(den)).unwrap()
}

#[test]
fn worked_examples() {
    assert_eq!(&rf(&[0, 1], &[1, 1]) + &rf(&[1], &[1, 1]), RatFun::one());
    assert_eq!(&RatFun::t() * &rf(&[1], &[0, 1]), RatFun::one());
    assert_eq!(&rf(&[-1, 0, 1], &[-1, 1]) - &RatFun::t(), RatFun::one());
    assert_eq!(rf(&[1, -6, 1], &[4]).degree(), 2);
    assert_eq!(RatFun::from_i64(5).degree(), 0);
    assert_eq!(rf(&[0, 0, 0, 1], &[-1, 1]).degree(), 3);
    assert!(RatFun::one().checked_div(&RatFun::zero()).is_err());
}

#[test]
fn evaluation_examples() {
    let i = Complex64::new(0.0, 1.0);
    for p in [Precision::Double, Precision::Extended] {
        assert!(rf(&[1, 0, 1], &[1]).eval(i, p).unwrap().norm() < 1e-15);
        assert!(
            (rf(&[1], &[0, 1]).eval(Complex64::new(2.0, 0.0), p).unwrap() - 0.5).norm() < 1e-15
        );
        let v = rf(&[1, -6, 1], &[4])
            .eval(Complex64::new(1.0, 1.0), p)
            .unwrap();
        assert!((v - Complex64::new(-1.25, -1.0)).norm() < 1e-14);
    }
    let err = rf(&[1], &[0, 1]).eval(Complex64::new(0.0, 0.0), Precision::Double);
    assert!(matches!(err, Err(AlgebraError::PoleAtPoint)));
}

#[test]
fn json_roundtrip() {
    let f = rf(&[1, -6, 1], &[4, 0, 3]);
    let text = serde_json::to_string(&f).unwrap();
    let back: RatFun = serde_json::from_str(&text).unwrap();
    assert_eq!(back, f);
}
