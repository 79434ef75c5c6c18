//! Densities of the pulled-back Betti form, on a grid from Betti paths and
//! pointwise from a holomorphic stencil.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::HeightError;
use crate::exactalg::Precision;
use crate::numeric::{compensated_sum, rect_disc_area};
use crate::periods::{
    align_basis, elliptic_log_raw, fiber_periods_unlabelled, lattice_coords, BettiPath, Disc,
    FiberLattice, LatticeField, PeriodsError,
};
use crate::weierstrass::{EllipticSurface, Section};

/// Density of `s*ω` against `du dv` (`t = u + iv`) at the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub chart: Disc,
    pub n: usize,
    pub spacing: f64,
    pub nodes: Vec<Complex64>,
    pub values: Vec<f64>,
}

fn derivative(
    values: &[[f64; 2]],
    n: usize,
    h: f64,
    i: usize,
    j: usize,
    along_rows: bool,
) -> [f64; 2] {
    // along_rows: derivative in j (real direction), else in i (imaginary)
    let at = |k: usize| {
        if along_rows {
            values[i * n + k]
        } else {
            values[k * n + j]
        }
    };
    let pos = if along_rows { j } else { i };
    let mut out = [0.0; 2];
    for c in 0..2 {
        out[c] = if pos == 0 {
            (-3.0 * at(0)[c] + 4.0 * at(1)[c] - at(2)[c]) / (2.0 * h)
        } else if pos == n - 1 {
            (3.0 * at(n - 1)[c] - 4.0 * at(n - 2)[c] + at(n - 3)[c]) / (2.0 * h)
        } else {
            (at(pos + 1)[c] - at(pos - 1)[c]) / (2.0 * h)
        };
    }
    out
}

/// `bundle_degree · det ∂(β1, β2)/∂(u, v)` by finite differences: central
/// inside the grid, second-order one-sided on its edges.
pub fn betti_density(
    field: &LatticeField,
    path: &BettiPath,
    bundle_degree: u32,
) -> Result<DensityGrid, HeightError> {
    let n = field.n;
    if path.n != n || path.nodes != field.nodes {
        return Err(HeightError::GridMismatch);
    }
    let h = field.spacing();
    let deg = bundle_degree as f64;
    let values = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let du = derivative(&path.beta, n, h, i, j, true);
            let dv = derivative(&path.beta, n, h, i, j, false);
            deg * (du[0] * dv[1] - dv[0] * du[1])
        })
        .collect();
    Ok(DensityGrid {
        chart: field.chart,
        n,
        spacing: h,
        nodes: field.nodes.clone(),
        values,
    })
}

impl DensityGrid {
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cut-cell midpoint rule: each node carries its cell of side `h`,
    /// weighted by the exact area of the cell inside the disc. Summed in
    /// row-major order.
    pub fn integrate(&self) -> f64 {
        let c = self.chart.center();
        let r = self.chart.radius();
        let h = self.spacing;
        compensated_sum(self.nodes.iter().zip(&self.values).map(|(t, v)| {
            let d = t - c;
            let area = rect_disc_area(
                d.re - h / 2.0,
                d.re + h / 2.0,
                d.im - h / 2.0,
                d.im + h / 2.0,
                r,
            );
            if area > 0.0 {
                v * area
            } else {
                0.0
            }
        }))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_re,t_im,rho\n");
        for (t, v) in self.nodes.iter().zip(&self.values) {
            out.push_str(&format!("{},{},{}\n", t.re, t.im, v));
        }
        out
    }

    /// Standalone SVG heatmap with a linear ramp between the extreme values.
    pub fn to_svg(&self) -> String {
        let n = self.n;
        let cell = (512 / n).max(2);
        let side = cell * n;
        let (lo, hi) = (self.min(), self.max());
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n",
            side,
            side + 40
        );
        for (k, v) in self.values.iter().enumerate() {
            let (i, j) = (k / n, k % n);
            let s = ((v - lo) / span).clamp(0.0, 1.0);
            let (r, g, b) = (
                (255.0 * s) as u8,
                (64.0 * (1.0 - (2.0 * s - 1.0).abs())) as u8,
                (255.0 * (1.0 - s)) as u8,
            );
            // row 0 is the bottom of the chart
            let y = (n - 1 - i) * cell;
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({r},{g},{b})\"/>\n",
                j * cell,
                y
            ));
        }
        out.push_str(&format!(
            "<text x=\"4\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">min {:.6e}  max {:.6e}</text>\n</svg>\n",
            side + 24,
            lo,
            hi
        ));
        out
    }
}

/// Local coordinate on the base: `t = ξ` or `t = 1/ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Coordinate {
    Affine,
    Inverse,
}

impl Coordinate {
    pub(crate) fn to_t(self, xi: Complex64) -> Complex64 {
        match self {
            Coordinate::Affine => xi,
            Coordinate::Inverse => 1.0 / xi,
        }
    }
}

fn log_at(p: &Section, t: Complex64, lattice: &FiberLattice) -> Result<Complex64, PeriodsError> {
    let (x, y) = match (p.x(), p.y()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Ok(Complex64::new(0.0, 0.0)),
    };
    match (
        x.eval(t, Precision::working()),
        y.eval(t, Precision::working()),
    ) {
        (Ok(xv), Ok(yv)) => elliptic_log_raw((xv, yv), lattice),
        _ => Ok(Complex64::new(0.0, 0.0)),
    }
}

/// Density of `s*ω` against the area of the coordinate `ξ`.
///
/// With `β` the Betti coordinates at `ξ` and `f(η) = z(η) - β1 ω1(η) -
/// β2 ω2(η)` taken near 0, the density is `deg |f'(ξ)|^2 / Im(conj(ω1) ω2)`;
/// `f'` comes from a four-point stencil of step `h`.
pub(crate) fn density_in(
    s: &EllipticSurface,
    p: &Section,
    coord: Coordinate,
    xi: Complex64,
    h: f64,
    bundle_degree: u32,
) -> Result<f64, PeriodsError> {
    if p.is_zero() {
        return Ok(0.0);
    }
    let t0 = coord.to_t(xi);
    let l0 = fiber_periods_unlabelled(s, t0)?;
    let z0 = log_at(p, t0, &l0)?;
    let beta = lattice_coords(z0, l0.omega1, l0.omega2);
    let mut f = [Complex64::new(0.0, 0.0); 4];
    let steps = [
        Complex64::new(h, 0.0),
        Complex64::new(-h, 0.0),
        Complex64::new(0.0, h),
        Complex64::new(0.0, -h),
    ];
    for (fk, d) in f.iter_mut().zip(steps) {
        let t = coord.to_t(xi + d);
        let l = fiber_periods_unlabelled(s, t)?;
        let (w1, w2) = align_basis((l0.omega1, l0.omega2), &l)?;
        let z = log_at(p, t, &l)?;
        let g = z - beta[0] * w1 - beta[1] * w2;
        let c = lattice_coords(g, w1, w2);
        *fk = g - c[0].round() * w1 - c[1].round() * w2;
    }
    let w = ((f[0] - f[1]) - Complex64::new(0.0, 1.0) * (f[2] - f[3])) / (4.0 * h);
    Ok(bundle_degree as f64 * w.norm_sqr() / l0.covolume())
}

/// Pointwise density at `t` against `du dv`, stencil step `h`.
pub fn pointwise_density(
    s: &EllipticSurface,
    p: &Section,
    t: Complex64,
    h: f64,
) -> Result<f64, HeightError> {
    Ok(density_in(
        s,
        p,
        Coordinate::Affine,
        t,
        h,
        super::BUNDLE_DEGREE,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactalg::{Poly, RatFun};
    use crate::periods::{betti_path, lattice_continue};

    fn test_surface() -> EllipticSurface {
        EllipticSurface::from_polys(Poly::from_i64s(&[0, -1]), Poly::from_i64s(&[0, 1])).unwrap()
    }

    #[test]
    fn zero_scaled_and_torsion() {
        let s = test_surface();
        let chart = Disc::new(Complex64::new(-1.0, 0.0), 0.25).unwrap();
        let f = lattice_continue(&s, chart, 17).unwrap();
        let zero = betti_path(&s, &Section::Zero, &f).unwrap();
        assert!(betti_density(&f, &zero, 2)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == 0.0));
        let mut path = betti_path(&s, &Section::from_i64(1, 1), &f).unwrap();
        let g1 = betti_density(&f, &path, 2).unwrap();
        assert!(g1.min() >= -1e-9 * g1.max());
        for b in path.beta.iter_mut() {
            *b = [3.0 * b[0], 3.0 * b[1]];
        }
        let g3 = betti_density(&f, &path, 2).unwrap();
        for (a, b) in g1.values.iter().zip(&g3.values) {
            assert!((b - 9.0 * a).abs() <= 1e-9 * b.abs().max(1e-300));
        }
        let mut other = path.clone();
        other.n = 9;
        assert_eq!(betti_density(&f, &other, 2), Err(HeightError::GridMismatch));

        // 2-torsion section (t, 0) on y^2 = x^3 - (3t^2+3t) x + 2t^3 + 3t^2
        let s2 = EllipticSurface::from_polys(
            Poly::from_i64s(&[0, -3, -3]),
            Poly::from_i64s(&[0, 0, 3, 2]),
        )
        .unwrap();
        let tors = Section::affine(RatFun::t(), RatFun::zero());
        assert!(s2.contains(&tors));
        let chart = Disc::new(Complex64::new(1.0, 0.5), 0.2).unwrap();
        let f2 = lattice_continue(&s2, chart, 17).unwrap();
        let path = betti_path(&s2, &tors, &f2).unwrap();
        let g = betti_density(&f2, &path, 2).unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-9));
        let d = pointwise_density(&s2, &tors, Complex64::new(1.0, 0.5), 1e-4).unwrap();
        assert!(d.abs() < 1e-12, "{d}");
    }

    #[test]
    fn pointwise_agrees_with_grid() {
        let s = test_surface();
        let p = Section::from_i64(1, 1);
        let chart = Disc::new(Complex64::new(-1.0, 0.0), 0.25).unwrap();
        let f = lattice_continue(&s, chart, 65).unwrap();
        let g = betti_density(&f, &betti_path(&s, &p, &f).unwrap(), 2).unwrap();
        let k = f.index(32, 32);
        let direct = pointwise_density(&s, &p, f.nodes[k], 1e-4).unwrap();
        assert!(
            (g.values[k] - direct).abs() < 1e-3 * direct,
            "{} {}",
            g.values[k],
            direct
        );
    }
}
