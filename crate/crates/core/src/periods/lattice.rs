//! Per-fiber data: roots, the period lattice and the elliptic logarithm.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::special::{agm, carlson_rf, reduce_basis, weierstrass_p};
use super::PeriodsError;
use crate::exactalg::Precision;
use crate::weierstrass::EllipticSurface;

/// Period lattice of `dx/y` on the fiber over `t`, with the cubic's roots
/// labelled by half periods: `e1 = x(ω1/2)`, `e2 = x((ω1+ω2)/2)`,
/// `e3 = x(ω2/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberLattice {
    pub t: Complex64,
    pub omega1: Complex64,
    pub omega2: Complex64,
    pub roots: [Complex64; 3],
}

impl FiberLattice {
    /// `Im(conj(ω1) ω2)`, positive for an oriented basis.
    pub fn covolume(&self) -> f64 {
        (self.omega1.conj() * self.omega2).im
    }

    /// Length of the shortest nonzero lattice vector.
    pub fn mesh(&self) -> f64 {
        reduce_basis(self.omega1, self.omega2).0.norm()
    }

    /// Same lattice with a new basis; roots are relabelled.
    pub(crate) fn with_basis(&self, omega1: Complex64, omega2: Complex64) -> FiberLattice {
        let roots = label_roots(&self.roots, omega1, omega2);
        FiberLattice {
            t: self.t,
            omega1,
            omega2,
            roots,
        }
    }
}

fn eval_coeffs(s: &EllipticSurface, t: Complex64) -> Result<(Complex64, Complex64), PeriodsError> {
    let a = s
        .a()
        .eval(t, Precision::working())
        .map_err(|_| PeriodsError::NearSingularFiber { t })?;
    let b = s
        .b()
        .eval(t, Precision::working())
        .map_err(|_| PeriodsError::NearSingularFiber { t })?;
    Ok((a, b))
}

fn cubic_scale(a: Complex64, b: Complex64) -> f64 {
    a.norm().sqrt().max(b.norm().cbrt())
}

/// Roots of `X^3 + a(t) X + b(t)` by Cardano's formula and Newton polish.
pub fn fiber_roots(s: &EllipticSurface, t: Complex64) -> Result<[Complex64; 3], PeriodsError> {
    let (a, b) = eval_coeffs(s, t)?;
    cubic_roots(a, b).ok_or(PeriodsError::NearSingularFiber { t })
}

pub(crate) fn cubic_roots(a: Complex64, b: Complex64) -> Option<[Complex64; 3]> {
    let scale = cubic_scale(a, b);
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    // work with the scaled cubic X^3 + p X + q, roots of size ~1
    let p = a / (scale * scale);
    let q = b / (scale * scale * scale);
    let d = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
    let sq = d.sqrt();
    let mut big = -q / 2.0 + sq;
    let alt = -q / 2.0 - sq;
    if alt.norm() > big.norm() {
        big = alt;
    }
    let c = big.powf(1.0 / 3.0);
    let mut roots = [Complex64::new(0.0, 0.0); 3];
    for (k, r) in roots.iter_mut().enumerate() {
        let w = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 3.0);
        let ck = w * c;
        *r = if ck.norm() == 0.0 {
            ck
        } else {
            ck - p / (3.0 * ck)
        };
        for _ in 0..4 {
            let f = *r * *r * *r + p * *r + q;
            let df = 3.0 * *r * *r + p;
            if df.norm() == 0.0 {
                break;
            }
            *r -= f / df;
        }
    }
    for i in 0..3 {
        for j in i + 1..3 {
            if (roots[i] - roots[j]).norm() < 1e-8 {
                return None;
            }
        }
    }
    Some(roots.map(|r| r * scale))
}

/// `(x, y) = (4℘(z), 4℘'(z))` on the lattice.
pub fn wp_fiber(z: Complex64, omega1: Complex64, omega2: Complex64) -> (Complex64, Complex64) {
    let (p, dp) = weierstrass_p(z, omega1, omega2);
    (4.0 * p, 4.0 * dp)
}

/// Real coordinates `(β1, β2)` with `z = β1 ω1 + β2 ω2`.
pub fn lattice_coords(z: Complex64, omega1: Complex64, omega2: Complex64) -> [f64; 2] {
    let det = omega1.re * omega2.im - omega2.re * omega1.im;
    [
        (z.re * omega2.im - omega2.re * z.im) / det,
        (omega1.re * z.im - z.re * omega1.im) / det,
    ]
}

fn label_roots(roots: &[Complex64; 3], w1: Complex64, w2: Complex64) -> [Complex64; 3] {
    let half = [0.5 * w1, 0.5 * (w1 + w2), 0.5 * w2];
    let vals = half.map(|h| wp_fiber(h, w1, w2).0);
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let best = PERMS
        .iter()
        .min_by(|p, q| {
            let cost = |p: &[usize; 3]| (0..3).map(|i| (roots[p[i]] - vals[i]).norm()).sum::<f64>();
            cost(p).total_cmp(&cost(q))
        })
        .unwrap();
    [roots[best[0]], roots[best[1]], roots[best[2]]]
}

fn normalised_arg(v: Complex64) -> (Complex64, f64) {
    let v = if v.re < 0.0 || (v.re == 0.0 && v.im < 0.0) {
        -v
    } else {
        v
    };
    (v, v.arg())
}

/// Canonical basis: ω1 is a shortest vector, normalised to `Re ω1 > 0`
/// and closest to the positive real axis; ω2 completes an oriented reduced
/// basis.
pub(crate) fn canonical_basis(c1: Complex64, c2: Complex64) -> (Complex64, Complex64) {
    let (u, v) = reduce_basis(c1, c2);
    let tol = 1e-9 * u.norm();
    let mut shortest: Vec<(Complex64, Complex64)> = vec![(u, v)];
    if (v.norm() - u.norm()).abs() <= tol {
        shortest.push((v, u));
    }
    for w in [v - u, v + u] {
        if (w.norm() - u.norm()).abs() <= tol {
            shortest.push((w, u));
        }
    }
    let (w1, partner) = shortest
        .into_iter()
        .map(|(w, p)| {
            let (w, arg) = normalised_arg(w);
            (w, p, arg)
        })
        .min_by(|a, b| {
            let (ka, kb) = (a.2.abs(), b.2.abs());
            if (ka - kb).abs() <= 1e-9 {
                b.2.total_cmp(&a.2)
            } else {
                ka.total_cmp(&kb)
            }
        })
        .map(|(w, p, _)| (w, p))
        .unwrap();
    let mut w2 = partner;
    if (w2 / w1).im < 0.0 {
        w2 = -w2;
    }
    let m = (w2 / w1).re;
    let mut k = m.round();
    if m - k == -0.5 {
        k -= 1.0;
    }
    w2 -= k * w1;
    (w1, w2)
}

/// Period lattice of `dx/y` over `t` from the complex AGM.
pub fn fiber_periods(s: &EllipticSurface, t: Complex64) -> Result<FiberLattice, PeriodsError> {
    let roots = fiber_roots(s, t)?;
    lattice_from_roots(t, roots)
}

pub(crate) fn lattice_from_roots(
    t: Complex64,
    roots: [Complex64; 3],
) -> Result<FiberLattice, PeriodsError> {
    let (w1, w2) = agm_basis(t, &roots)?;
    let roots = label_roots(&roots, w1, w2);
    Ok(FiberLattice {
        t,
        omega1: w1,
        omega2: w2,
        roots,
    })
}

fn agm_basis(t: Complex64, roots: &[Complex64; 3]) -> Result<(Complex64, Complex64), PeriodsError> {
    let mut cands = [Complex64::new(0.0, 0.0); 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let m = agm((roots[i] - roots[j]).sqrt(), (roots[i] - roots[k]).sqrt())
            .ok_or(PeriodsError::AGMNonConvergence { t })?;
        cands[i] = 2.0 * PI / m;
    }
    let mut best = (0, 1);
    let mut area = 0.0;
    for (p, q) in [(0, 1), (0, 2), (1, 2)] {
        let a = (cands[p].conj() * cands[q]).im.abs();
        if a > area {
            area = a;
            best = (p, q);
        }
    }
    if !(area > 0.0 && area.is_finite()) {
        return Err(PeriodsError::NearSingularFiber { t });
    }
    Ok(canonical_basis(cands[best.0], cands[best.1]))
}

/// Elliptic logarithm of `(x, y)` on the fiber over `t`, reduced to the
/// fundamental parallelogram `{β1 ω1 + β2 ω2 : 0 <= β1, β2 < 1}`.
pub fn elliptic_log(
    _s: &EllipticSurface,
    _t: Complex64,
    point: (Complex64, Complex64),
    lattice: &FiberLattice,
) -> Result<Complex64, PeriodsError> {
    let z = elliptic_log_raw(point, lattice)?;
    let (w1, w2) = (lattice.omega1, lattice.omega2);
    let mut c = lattice_coords(z, w1, w2);
    let near = (c[0] - c[0].round()) * w1 + (c[1] - c[1].round()) * w2;
    if near.norm() < 1e-8 * w1.norm() {
        return Err(PeriodsError::PointNearIdentity);
    }
    c[0] -= c[0].floor();
    c[1] -= c[1].floor();
    Ok(c[0] * w1 + c[1] * w2)
}

/// Some logarithm of `(x, y)`, not reduced. The root order of `lattice`
/// is irrelevant here.
pub(crate) fn elliptic_log_raw(
    point: (Complex64, Complex64),
    lattice: &FiberLattice,
) -> Result<Complex64, PeriodsError> {
    let (x, y) = point;
    let (w1, w2) = (lattice.omega1, lattice.omega2);
    let e = lattice.roots;
    // rotate so no x - e_i lies on the branch cut of the square root
    let mut phi = 0.0;
    let mut margin = -1.0;
    for k in 0..6 {
        let ph = k as f64 * PI / 3.0;
        let rot = Complex64::from_polar(1.0, ph);
        let m = e
            .iter()
            .map(|ei| PI - (rot * (x - ei)).arg().abs())
            .fold(f64::INFINITY, f64::min);
        if m > margin {
            margin = m;
            phi = ph;
        }
    }
    let rot = Complex64::from_polar(1.0, phi);
    let mut z = Complex64::from_polar(2.0, phi / 2.0)
        * carlson_rf(rot * (x - e[0]), rot * (x - e[1]), rot * (x - e[2]));
    let (_, dp) = wp_fiber(z, w1, w2);
    if (dp - y).norm() > (dp + y).norm() {
        z = -z;
    }
    let scale = e.iter().map(|r| r.norm()).fold(0.0, f64::max).max(1e-300);
    let flat = 1e-6 * scale.powf(1.5);
    // Newton on x, or on y where dx/dz vanishes (near half periods), using
    // dy/dz = (3x² + a)/2; picks the equation with the smaller error in z
    for _ in 0..8 {
        let (px, py) = wp_fiber(z, w1, w2);
        let dy = 0.5
            * ((px - e[1]) * (px - e[2]) + (px - e[0]) * (px - e[2]) + (px - e[0]) * (px - e[1]));
        let step = if scale.sqrt() * py.norm() < dy.norm() {
            (py - y) / dy
        } else if py.norm() > 0.0 {
            (px - x) / py
        } else {
            break;
        };
        z -= step;
        if step.norm() <= 1e-16 * w1.norm() {
            break;
        }
    }
    let (px, py) = wp_fiber(z, w1, w2);
    let mut residual = (px - x).norm() / x.norm().max(scale);
    if y.norm() > flat {
        residual = residual.max((py - y).norm() / y.norm().max(scale.powf(1.5)));
    }
    if !(residual <= 1e-9) {
        return Err(PeriodsError::InversionResidual { residual });
    }
    Ok(z)
}

/// Canonical basis over `t` without the half-period labelling of roots.
pub(crate) fn fiber_periods_unlabelled(
    s: &EllipticSurface,
    t: Complex64,
) -> Result<FiberLattice, PeriodsError> {
    let roots = fiber_roots(s, t)?;
    let (w1, w2) = agm_basis(t, &roots)?;
    Ok(FiberLattice {
        t,
        omega1: w1,
        omega2: w2,
        roots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactalg::Poly;

    fn surf(a: &[i64], b: &[i64]) -> EllipticSurface {
        EllipticSurface::from_polys(Poly::from_i64s(a), Poly::from_i64s(b)).unwrap()
    }

    #[test]
    fn lemniscatic() {
        let s = surf(&[-1], &[0]);
        let l = fiber_periods(&s, Complex64::new(0.3, 0.0)).unwrap();
        let varpi = PI
            / agm(Complex64::new(1.0, 0.0), Complex64::new(2f64.sqrt(), 0.0))
                .unwrap()
                .re;
        assert!((l.omega1 - 2.0 * varpi).norm() < 1e-12);
        assert!((l.omega2 - Complex64::new(0.0, 2.0 * varpi)).norm() < 1e-12);
        assert!((l.roots[0] - 1.0).norm() < 1e-12);
        assert!(l.roots[2].norm() < 1e-12 || (l.roots[2] + 1.0).norm() < 1e-12);
    }

    #[test]
    fn roots_vieta() {
        let s = surf(&[0, -1], &[0, 1]);
        let r = fiber_roots(&s, Complex64::new(-1.0, 0.0)).unwrap();
        let sum = r[0] + r[1] + r[2];
        let prod = r[0] * r[1] * r[2];
        assert!(sum.norm() < 1e-14);
        assert!((prod - 1.0).norm() < 1e-14);
        let unity = fiber_roots(&surf(&[0], &[-1]), Complex64::new(2.0, 1.0)).unwrap();
        for z in unity {
            assert!((z * z * z - 1.0).norm() < 1e-14);
        }
        assert!(matches!(
            fiber_roots(&s, Complex64::new(0.0, 0.0)),
            Err(PeriodsError::NearSingularFiber { .. })
        ));
    }

    #[test]
    fn half_periods_and_roundtrip() {
        let s = surf(&[0, -1], &[0, 1]);
        let t = Complex64::new(-1.0, 0.2);
        let l = fiber_periods(&s, t).unwrap();
        assert!(l.covolume() > 0.0);
        let z = elliptic_log(&s, t, (l.roots[0], Complex64::new(0.0, 0.0)), &l).unwrap();
        let c = lattice_coords(z, l.omega1, l.omega2);
        assert!(
            (c[0] - 0.5).abs() < 1e-7 && c[1].abs().min((c[1] - 1.0).abs()) < 1e-7,
            "{c:?}"
        );
        let z = elliptic_log(&s, t, (l.roots[2], Complex64::new(0.0, 0.0)), &l).unwrap();
        let c = lattice_coords(z, l.omega1, l.omega2);
        assert!(
            c[0].abs().min((c[0] - 1.0).abs()) < 1e-7 && (c[1] - 0.5).abs() < 1e-7,
            "{c:?}"
        );
        let z = elliptic_log(
            &s,
            t,
            (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
            &l,
        )
        .unwrap();
        let (x, y) = wp_fiber(z, l.omega1, l.omega2);
        assert!((x - 1.0).norm() < 1e-9 && (y - 1.0).norm() < 1e-9);
    }

    #[test]
    fn canonical_is_stable_under_basis_change() {
        let (w1, w2) = (Complex64::new(1.1, 0.3), Complex64::new(-0.2, 0.9));
        let a = canonical_basis(w1, w2);
        let b = canonical_basis(3.0 * w1 + 2.0 * w2, w1 + w2);
        assert!((a.0 - b.0).norm() < 1e-12 && (a.1 - b.1).norm() < 1e-12);
    }
}
