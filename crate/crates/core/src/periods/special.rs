//! Arithmetic–geometric mean, Carlson's symmetric integral and the
//! Weierstrass function through its q-expansion.

use std::f64::consts::PI;

use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub const AGM_MAX_ITERS: usize = 200;

/// Complex AGM with the optimal branch: each new geometric mean is the
/// square root closer to the arithmetic mean. `None` after
/// [`AGM_MAX_ITERS`] steps without convergence.
pub fn agm(mut a: Complex64, mut b: Complex64) -> Option<Complex64> {
    for _ in 0..AGM_MAX_ITERS {
        let a1 = 0.5 * (a + b);
        let mut b1 = (a * b).sqrt();
        if (a1 - b1).norm() > (a1 + b1).norm() {
            b1 = -b1;
        }
        if (a1 - b1).norm() <= 1e-15 * a1.norm() {
            return Some(a1);
        }
        if !(a1.is_finite() && b1.is_finite()) || a1.norm() == 0.0 {
            return None;
        }
        a = a1;
        b = b1;
    }
    None
}

/// Carlson's `R_F(x, y, z)` by duplication, principal square roots.
pub fn carlson_rf(mut x: Complex64, mut y: Complex64, mut z: Complex64) -> Complex64 {
    let (x0, y0) = (x, y);
    let a0 = (x + y + z) / 3.0;
    let q = [x, y, z]
        .iter()
        .map(|v| (a0 - v).norm())
        .fold(0.0, f64::max)
        * (3.0e-16f64).powf(-1.0 / 6.0);
    let mut a = a0;
    let mut pow4 = 1.0f64;
    for _ in 0..100 {
        if pow4.recip() * q < a.norm() {
            break;
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sx * sz + sy * sz;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        a = 0.25 * (a + lam);
        pow4 *= 4.0;
    }
    let xx = (a0 - x0) / (pow4 * a);
    let yy = (a0 - y0) / (pow4 * a);
    let zz = -xx - yy;
    let e2 = xx * yy - zz * zz;
    let e3 = xx * yy * zz;
    (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / a.sqrt()
}

/// Gauss-reduced basis `(u, v)` of the lattice `Zω1 + Zω2` with
/// `|u| <= |v|`, `|Re(v/u)| <= 1/2` and `Im(v/u) > 0`.
pub fn reduce_basis(w1: Complex64, w2: Complex64) -> (Complex64, Complex64) {
    let (mut u, mut v) = if w1.norm() <= w2.norm() {
        (w1, w2)
    } else {
        (w2, w1)
    };
    for _ in 0..200 {
        let m = (v / u).re.round();
        v -= m * u;
        if v.norm() < u.norm() {
            std::mem::swap(&mut u, &mut v);
        } else {
            break;
        }
    }
    if (v / u).im < 0.0 {
        v = -v;
    }
    (u, v)
}

fn f_term(one_minus: Complex64, v: Complex64) -> Complex64 {
    v / (one_minus * one_minus)
}

fn g_term(one_minus: Complex64, v: Complex64) -> Complex64 {
    v * (1.0 + v) / (one_minus * one_minus * one_minus)
}

/// `1 - e^{w}`, accurate for small `w`.
fn one_minus_exp(w: Complex64) -> Complex64 {
    if w.norm() < 1e-3 {
        // -(w + w^2/2 + w^3/6 + w^4/24 + w^5/120)
        -(w * (1.0 + w * (0.5 + w * (1.0 / 6.0 + w * (1.0 / 24.0 + w / 120.0)))))
    } else {
        1.0 - w.exp()
    }
}

/// `(℘(z), ℘'(z))` for the lattice generated by `w1, w2`.
pub fn weierstrass_p(z: Complex64, w1: Complex64, w2: Complex64) -> (Complex64, Complex64) {
    let (u, v) = reduce_basis(w1, w2);
    let tau = v / u;
    let mut w = z / u;
    let n = (w.im / tau.im).round();
    w -= n * tau;
    w -= w.re.round();
    let two_pi_i = 2.0 * PI * I;
    let q = (two_pi_i * tau).exp();
    let lw = two_pi_i * w;
    let uu = lw.exp();
    // n = 0 term
    let om0 = one_minus_exp(lw);
    let mut s1 = f_term(om0, uu);
    let mut s1d = g_term(om0, uu);
    let mut s2 = Complex64::new(0.0, 0.0);
    let mut qn = Complex64::new(1.0, 0.0);
    for _ in 1..60 {
        qn *= q;
        if qn.norm() < 1e-300 {
            break;
        }
        let a = qn * uu;
        let b = qn / uu;
        let ta = f_term(1.0 - a, a);
        let tb = f_term(1.0 - b, b);
        let tq = f_term(1.0 - qn, qn);
        s1 += ta + tb;
        s1d += g_term(1.0 - a, a) - g_term(1.0 - b, b);
        s2 += tq;
        let size = ta.norm() + tb.norm() + tq.norm();
        if size < 1e-18 * (s1.norm() + 1.0) {
            break;
        }
    }
    let p = two_pi_i * two_pi_i * (s1 + 1.0 / 12.0 - 2.0 * s2) / (u * u);
    let dp = two_pi_i * two_pi_i * two_pi_i * s1d / (u * u * u);
    (p, dp)
}
