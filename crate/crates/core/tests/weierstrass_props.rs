use betti_core::weierstrass::{TateConfig, WeierstrassError};
use betti_core::{EllipticSurface, Poly, RatFun, Section};
use proptest::prelude::*;

fn p1t() -> EllipticSurface {
    EllipticSurface::from_polys(Poly::from_i64s(&[0, -1]), Poly::from_i64s(&[0, 1])).unwrap()
}

fn torsion_surface() -> EllipticSurface {
    EllipticSurface::from_polys(
        Poly::from_i64s(&[0, -3, -3]),
        Poly::from_i64s(&[0, 0, 3, 2]),
    )
    .unwrap()
}

fn lin(c: (i64, i64)) -> RatFun {
    RatFun::from_poly(Poly::from_i64s(&[c.0, c.1]))
}

/// A surface through two prescribed points: solve for `a`, `b` from
/// `y_i^2 = x_i^3 + a x_i + b`.
fn surface_through(p: &Section, q: &Section) -> Option<EllipticSurface> {
    let (x0, y0, x1, y1) = (p.x()?, p.y()?, q.x()?, q.y()?);
    let c0 = &(y0 * y0) - &(&(x0 * x0) * x0);
    let c1 = &(y1 * y1) - &(&(x1 * x1) * x1);
    let a = (&c0 - &c1).checked_div(&(x0 - x1)).ok()?;
    let b = &c0 - &(&a * x0);
    EllipticSurface::new(a, b).ok()
}

type Coeffs = ((i64, i64), (i64, i64));

fn point_strategy() -> impl Strategy<Value = Coeffs> {
    let c = (-3i64..=3, -3i64..=3);
    (c.clone(), c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn group_law_on_random_surfaces(p in point_strategy(), q in point_strategy()) {
        let p = Section::affine(lin(p.0), lin(p.1));
        let q = Section::affine(lin(q.0), lin(q.1));
        prop_assume!(p.x() != q.x());
        let Some(s) = surface_through(&p, &q) else { return Ok(()); };
        prop_assert!(s.contains(&p) && s.contains(&q));
        let pq = s.section_add(&p, &q);
        prop_assert_eq!(&pq, &s.section_add(&q, &p));
        let r = s.section_mul(2, &q);
        prop_assert_eq!(s.section_add(&pq, &r), s.section_add(&p, &s.section_add(&q, &r)));
        for x in [&pq, &r, &s.section_sub(&p, &q)] {
            prop_assert!(s.contains(x));
        }
        prop_assert!(s.section_add(&pq, &s.section_neg(&pq)).is_zero());
        prop_assert_eq!(s.section_add(&p, &Section::Zero), p.clone());
    }

    #[test]
    fn multiples_compose(a in -3i64..=3, b in -3i64..=3) {
        let s = p1t();
        let p = Section::from_i64(1, 1);
        let lhs = s.section_add(&s.section_mul(a, &p), &s.section_mul(b, &p));
        prop_assert_eq!(&lhs, &s.section_mul(a + b, &p));
        prop_assert!(s.contains(&lhs));
        if (a * b).abs() <= 4 {
            prop_assert_eq!(s.section_mul(a, &s.section_mul(b, &p)), s.section_mul(a * b, &p));
        }
    }

    #[test]
    fn tate_height_nonnegative(c in point_strategy(), shift in 1i64..=3, qy in (-3i64..=3, -3i64..=3)) {
        // x(Q) - x(P) constant keeps a, b polynomial
        let p = Section::affine(lin(c.0), lin(c.1));
        let q = Section::affine(&lin(c.0) + &RatFun::from_i64(shift), lin(qy));
        let Some(s) = surface_through(&p, &q) else { return Ok(()); };
        for x in [&p, &q] {
            let r = s.tate_height(x, 4).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(r.value >= 0.0 && r.estimates.iter().all(|e| *e >= 0.0));
        }
    }
}

#[test]
fn surface_examples() {
    let s = p1t();
    let mut locs: Vec<f64> = s.bad_fibers().iter().map(|b| b.location.re).collect();
    locs.sort_by(f64::total_cmp);
    assert_eq!(locs.len(), 2);
    assert!(locs[0].abs() < 1e-10 && (locs[1] - 6.75).abs() < 1e-10);
    assert!(s.infinity().bad);
    let singular = EllipticSurface::from_polys(Poly::zero(), Poly::zero());
    assert!(matches!(singular, Err(WeierstrassError::SingularFamily)));
    let constant = EllipticSurface::from_polys(Poly::zero(), Poly::one()).unwrap();
    assert!(constant.bad_fibers().is_empty());
}

#[test]
fn section_examples() {
    let s = p1t();
    let p = Section::from_i64(1, 1);
    assert_eq!(s.section_add(&p, &Section::from_i64(1, -1)), Section::Zero);
    let two = s.section_add(&p, &p);
    let want = RatFun::new(Poly::from_i64s(&[1, -6, 1]), Poly::from_i64s(&[4])).unwrap();
    assert_eq!(two.x(), Some(&want));
    assert_eq!(s.section_mul(2, &p), two);
    assert_eq!(s.naive_height(&Section::Zero), 0);
    assert_eq!(s.naive_height(&p), 0);
    assert_eq!(s.naive_height(&two), 2);
}

#[test]
fn naive_height_is_quasi_quadratic() {
    // empirical constant over the sections below
    const C: usize = 4;
    let s = p1t();
    let ts = torsion_surface();
    let p = Section::from_i64(1, 1);
    let q = Section::affine(lin((1, 1)), RatFun::one());
    let mut cases: Vec<(&EllipticSurface, Section)> =
        (1..=5).map(|m| (&s, s.section_mul(m, &p))).collect();
    cases.extend((1..=3).map(|m| (&ts, ts.section_mul(m, &q))));
    for (surf, x) in cases {
        let h1 = surf.naive_height(&x);
        let h2 = surf.naive_height(&surf.section_mul(2, &x));
        assert!(h2.abs_diff(4 * h1) <= C, "h(P) = {h1}, h(2P) = {h2}");
    }
}

#[test]
fn tate_height_is_quadratic() {
    let s = p1t();
    let ts = torsion_surface();
    let p = Section::from_i64(1, 1);
    let q = Section::affine(lin((1, 1)), RatFun::one());
    for (surf, x) in [(&s, p), (&ts, q)] {
        let base = surf.tate_height(&x, 6).unwrap();
        for m in 1..=3i64 {
            let r = surf.tate_height(&surf.section_mul(m, &x), 6).unwrap();
            let m2 = (m * m) as f64;
            assert!((r.value - m2 * base.value).abs() <= r.error + m2 * base.error + 1e-12);
        }
    }
}

#[test]
fn torsion_has_zero_height() {
    let ts = torsion_surface();
    let tors = Section::affine(RatFun::t(), RatFun::zero());
    assert!(ts.contains(&tors));
    let r = ts.tate_height(&tors, 6).unwrap();
    assert!(r.estimates[1..].iter().all(|e| *e == 0.0));
    assert_eq!(ts.tate_height(&Section::Zero, 4).unwrap().value, 0.0);
}

#[test]
fn tate_estimate_matches_telescoping_oracle() {
    // h(P) + sum_k 4^{-k} (h(2^k P) - 4 h(2^{k-1} P)); the orbit starts with
    // the chord-tangent law and continues with the x-only duplication formula
    // x(2Q) = (x^4 - 2a x^2 - 8b x + a^2) / (4 (x^3 + a x + b)). The tail past
    // K is estimated from the last increment.
    let s = p1t();
    let p = Section::from_i64(1, 1);
    const K: i32 = 4;
    let mut q = p.clone();
    let mut heights = vec![s.naive_height(&q) as f64];
    for _ in 0..2 {
        q = s.section_add(&q, &q);
        heights.push(s.naive_height(&q) as f64);
    }
    let (a, b) = (s.a().clone(), s.b().clone());
    let mut x = q.x().unwrap().clone();
    for _ in 2..K {
        let x2 = &x * &x;
        let num =
            &(&(&x2 * &x2) - &(&a * &x2).scale_i64(2)) + &(&(&a * &a) - &(&b * &x).scale_i64(8));
        let den = (&(&(&x2 * &x) + &(&a * &x)) + &b).scale_i64(4);
        x = num.checked_div(&den).unwrap();
        heights.push(x.degree() as f64);
    }
    let mut oracle = heights[0];
    let mut last = 0.0;
    for k in 1..=K as usize {
        last = heights[k] - 4.0 * heights[k - 1];
        oracle += last / 4f64.powi(k as i32);
    }
    let tail = f64::abs(last) / 4f64.powi(K) / 3.0;
    let cfg = TateConfig {
        max_iters: 10,
        degree_cap: 200_000,
    };
    let r = s.tate_height_with(&p, 8, &cfg).unwrap();
    assert_eq!(
        r.degrees[..=K as usize]
            .iter()
            .map(|d| *d as f64)
            .collect::<Vec<_>>(),
        heights
    );
    assert!(
        (r.value - oracle).abs() <= 1e-3 + tail,
        "{} vs {oracle}",
        r.value
    );
    assert!(r.value > 0.0);
}
