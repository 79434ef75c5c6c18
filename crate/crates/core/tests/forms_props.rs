use std::f64::consts::PI;

use betti_core::betti_heights::QuadOptions;
use betti_core::exactalg::rat;
use betti_core::forms_generic::{
    example_closed_form, example_map, fs_density, generic_partial_height, hol_derive, HolExpr,
    ProductMap,
};
use betti_core::Disc;
use num_complex::Complex64;
use proptest::prelude::*;

/// Small trees in `z`; divisors are shifted so they stay away from the unit disc.
fn expr_strategy() -> impl Strategy<Value = HolExpr> {
    let leaf = prop_oneof![Just(HolExpr::var()), (-3i64..=3).prop_map(HolExpr::int)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| HolExpr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| HolExpr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| HolExpr::mul(a, b)),
            (inner.clone(), 0i32..=3).prop_map(|(a, k)| HolExpr::powi(a, k)),
            (inner, prop_oneof![Just(-3i64), Just(-2), Just(2), Just(3)])
                .prop_map(|(a, c)| HolExpr::div(a, HolExpr::sub(HolExpr::var(), HolExpr::int(c)))),
        ]
    })
}

fn point() -> impl Strategy<Value = Complex64> {
    (0.0f64..0.9, 0.0f64..(2.0 * PI)).prop_map(|(r, th)| Complex64::from_polar(r, th))
}

fn disc(r: f64) -> Disc {
    Disc::new(Complex64::new(0.0, 0.0), r).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn derivative_matches_finite_differences(e in expr_strategy(), z in point()) {
        let f = |w: Complex64| e.eval(w).unwrap();
        let v = f(z);
        prop_assume!(v.norm() < 1e4);
        let d = hol_derive(&e).eval(z).unwrap();
        let scale = 1.0 + v.norm() + d.norm();
        for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let h = 1e-5 * dir;
            let fd = (f(z + h) - f(z - h)) / (2.0 * h);
            prop_assert!((fd - d).norm() <= 1e-6 * scale, "{e:?} at {z}: {d} vs {fd}");
        }
    }

    #[test]
    fn density_is_nonnegative(a in expr_strategy(), b in expr_strategy(), z in point()) {
        let m = ProductMap::new(vec![a, b]).unwrap();
        prop_assert!(fs_density(&m, z).unwrap() >= 0.0);
    }

    #[test]
    fn json_roundtrip(e in expr_strategy()) {
        let back = HolExpr::from_json(&e.to_json()).unwrap();
        prop_assert_eq!(back, e);
    }
}

#[test]
fn derivative_examples() {
    let z = HolExpr::var();
    let d = hol_derive(&HolExpr::div(
        z.clone(),
        HolExpr::sub(HolExpr::int(1), z.clone()),
    ));
    for w in [
        Complex64::new(0.2, 0.1),
        Complex64::new(-0.5, 0.3),
        Complex64::new(0.1, -0.7),
    ] {
        let want = 1.0 / ((1.0 - w) * (1.0 - w));
        assert!((d.eval(w).unwrap() - want).norm() < 1e-13);
    }
    assert_eq!(hol_derive(&HolExpr::int(7)), HolExpr::int(0));
    let d5 = hol_derive(&HolExpr::powi(z, 5))
        .eval(Complex64::new(0.5, 0.5))
        .unwrap();
    assert!((d5 - 5.0 * Complex64::new(0.5, 0.5).powi(4)).norm() < 1e-14);
}

#[test]
fn density_examples() {
    let z = HolExpr::var();
    let zc = ProductMap::new(vec![z.clone(), HolExpr::int(3)]).unwrap();
    assert!((fs_density(&zc, Complex64::new(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
    let w = Complex64::new(0.3, -0.4);
    assert!((fs_density(&zc, w).unwrap() - 1.0 / (1.25f64 * 1.25)).abs() < 1e-15);
    let sq = example_map(2, rat(1, 4));
    assert!((fs_density(&sq, Complex64::new(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
    let zz = ProductMap::new(vec![z.clone(), z]).unwrap();
    assert!((fs_density(&zz, Complex64::new(1.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn product_density_dominates_single_factor() {
    // the ratio of the product form to the first factor's form stays in a
    // bounded band on a compact sub-disc
    let m = example_map(5, rat(1, 2));
    let single = ProductMap::new(vec![m.components()[0].clone()]).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..=20 {
        for j in 0..=20 {
            let z = Complex64::new(-0.6 + 0.06 * i as f64, -0.6 + 0.06 * j as f64);
            let ratio = fs_density(&m, z).unwrap() / fs_density(&single, z).unwrap();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    assert!(lo >= 1.0 && hi.is_finite() && hi < 10.0, "{lo} {hi}");
}

#[test]
fn quadrature_is_stable_under_refinement() {
    let m = example_map(4, rat(1, 3));
    let coarse = generic_partial_height(
        &m,
        disc(0.5),
        &QuadOptions {
            tol: 1e-10,
            max_levels: 8,
            initial_n: 8,
        },
    )
    .unwrap();
    let fine = generic_partial_height(
        &m,
        disc(0.5),
        &QuadOptions {
            tol: 1e-10,
            max_levels: 8,
            initial_n: 16,
        },
    )
    .unwrap();
    assert!((coarse.value - fine.value).abs() <= coarse.error.max(fine.error) + 1e-12);
}

#[test]
fn worked_partial_heights() {
    let opts = QuadOptions {
        tol: 1e-12,
        max_levels: 8,
        initial_n: 16,
    };
    let z = HolExpr::var();
    let constant = ProductMap::new(vec![z, HolExpr::int(2)]).unwrap();
    let v = generic_partial_height(&constant, disc(0.5), &opts)
        .unwrap()
        .value;
    assert!((v - 2.0 * PI / 5.0).abs() < 1e-6);

    let v = generic_partial_height(&example_map(2, rat(1, 4)), disc(0.5), &opts)
        .unwrap()
        .value;
    let want = 2.0 * PI / 5.0 + 4.0 * PI * (1.0 / 256.0) / (257.0 / 256.0);
    assert!((v - want).abs() < 1e-6);

    let v = generic_partial_height(&example_map(3, rat(1, 27)), disc(0.5), &opts)
        .unwrap()
        .value;
    assert!((v - (2.0 * PI / 5.0 + 6.0 * PI / 46657.0)).abs() < 1e-6);
    assert!((v - 1.2570411).abs() < 1e-7);

    let tiny = generic_partial_height(&example_map(3, rat(1, 27)), disc(1e-3), &opts)
        .unwrap()
        .value;
    assert!(tiny <= 1e-5);
}

#[test]
fn second_term_decreases_along_the_bounded_schedule() {
    // 2π n u / (1 + u) with u = a_n^2 r^{2n}
    let second = |n: i32| {
        let u = (n as f64).powi(-2 * n) * 0.25f64.powi(n);
        2.0 * PI * n as f64 * u / (1.0 + u)
    };
    for n in 2..12 {
        assert!(second(n + 1) < second(n), "n = {n}");
        let full = example_closed_form(n as i64, (n as f64).powi(-n), 0.5);
        assert!((full - 2.0 * PI / 5.0 - second(n)).abs() < 1e-15);
    }
    // quadrature follows along the same schedule while the term is above rounding level
    let opts = QuadOptions {
        tol: 1e-12,
        max_levels: 8,
        initial_n: 16,
    };
    let mut prev = f64::INFINITY;
    for n in 2..=6 {
        let a = num_rational::BigRational::new(1.into(), num_bigint::BigInt::from(n).pow(n as u32));
        let v = generic_partial_height(&example_map(n, a), disc(0.5), &opts)
            .unwrap()
            .value
            - 2.0 * PI / 5.0;
        assert!(v < prev, "n = {n}");
        prev = v;
    }
}
