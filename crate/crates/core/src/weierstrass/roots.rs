//! Numerical roots of exact polynomials: companion-matrix eigenvalues, then
//! Newton polish against the exact coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::exactalg::Poly;

/// Roots of a squarefree polynomial, each polished to a relative residual of
/// about machine precision. Returns an empty list for constants.
pub fn polished_roots(p: &Poly) -> Vec<Complex64> {
    let deg = match p.degree() {
        Some(d) if d > 0 => d,
        _ => return Vec::new(),
    };
    let c = p.monic().to_f64_coeffs();
    let mut roots = if deg == 1 {
        vec![Complex64::new(-c[0], 0.0)]
    } else {
        let mut m = DMatrix::<f64>::zeros(deg, deg);
        for i in 1..deg {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..deg {
            m[(i, deg - 1)] = -c[i];
        }
        m.complex_eigenvalues().iter().copied().collect::<Vec<_>>()
    };
    let dp = p.derivative();
    for r in roots.iter_mut() {
        *r = newton_polish(p, &dp, *r);
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

fn newton_polish(p: &Poly, dp: &Poly, mut z: Complex64) -> Complex64 {
    for _ in 0..60 {
        let f = p.eval_complex(z);
        let d = dp.eval_complex(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = f / d;
        z -= step;
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

/// `|p(z)| / Σ|c_i||z|^i`, the backward-error style residual.
pub fn relative_residual(p: &Poly, z: Complex64) -> f64 {
    let c = p.to_f64_coeffs();
    let scale: f64 = c
        .iter()
        .enumerate()
        .map(|(i, ci)| ci.abs() * z.norm().powi(i as i32))
        .sum();
    if scale == 0.0 {
        return 0.0;
    }
    p.eval_complex(z).norm() / scale
}
