//! Continuation of period bases over a chart and continuously lifted Betti
//! coordinates.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::{elliptic_log, fiber_periods, lattice_coords, FiberLattice};
use super::{Disc, PeriodsError};
use crate::exactalg::Precision;
use crate::weierstrass::{polished_roots, EllipticSurface, Section};

/// Period lattices on a row-major `n x n` grid covering the bounding
/// square of `chart`, with one continuous choice of basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeField {
    pub chart: Disc,
    pub n: usize,
    pub nodes: Vec<Complex64>,
    pub lattices: Vec<FiberLattice>,
}

/// Row `i` runs along the imaginary axis, column `j` along the real one.
pub(crate) fn grid_nodes(chart: &Disc, n: usize) -> Vec<Complex64> {
    let r = chart.radius();
    let h = 2.0 * r / (n - 1) as f64;
    let c = chart.center();
    (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            c + Complex64::new(-r + j as f64 * h, -r + i as f64 * h)
        })
        .collect()
}

/// Sweep order from the middle node: along the middle row, then up and
/// down every column. Returns `(node, parent)` pairs; the first entry has
/// no parent.
pub(crate) fn sweep(n: usize) -> Vec<(usize, Option<usize>)> {
    let m = n / 2;
    let id = |i: usize, j: usize| i * n + j;
    let mut out = vec![(id(m, m), None)];
    for j in m + 1..n {
        out.push((id(m, j), Some(id(m, j - 1))));
    }
    for j in (0..m).rev() {
        out.push((id(m, j), Some(id(m, j + 1))));
    }
    for j in 0..n {
        for i in m + 1..n {
            out.push((id(i, j), Some(id(i - 1, j))));
        }
        for i in (0..m).rev() {
            out.push((id(i, j), Some(id(i + 1, j))));
        }
    }
    out
}

/// Horizontal and vertical neighbour pairs.
pub(crate) fn neighbour_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| {
        (0..n).flat_map(move |j| {
            let k = i * n + j;
            let right = (j + 1 < n).then_some((k, k + 1));
            let up = (i + 1 < n).then_some((k, k + n));
            right.into_iter().chain(up)
        })
    })
}

/// Expresses the basis `prev` (of a nearby lattice) in the fresh basis and
/// rounds to the nearest unimodular matrix with entries in `[-2, 2]`.
pub(crate) fn align(
    prev: (Complex64, Complex64),
    fresh: &FiberLattice,
) -> Result<FiberLattice, PeriodsError> {
    let (w1, w2) = align_basis(prev, fresh)?;
    Ok(fresh.with_basis(w1, w2))
}

pub(crate) fn align_basis(
    prev: (Complex64, Complex64),
    fresh: &FiberLattice,
) -> Result<(Complex64, Complex64), PeriodsError> {
    let t = fresh.t;
    let (f1, f2) = (fresh.omega1, fresh.omega2);
    let a = lattice_coords(prev.0, f1, f2).map(f64::round);
    let b = lattice_coords(prev.1, f1, f2).map(f64::round);
    let det = a[0] * b[1] - a[1] * b[0];
    if det != 1.0 || a.iter().chain(b.iter()).any(|v| v.abs() > 2.0) {
        return Err(PeriodsError::ContinuationAmbiguity { t });
    }
    let w1 = a[0] * f1 + a[1] * f2;
    let w2 = b[0] * f1 + b[1] * f2;
    let tol = 0.5 * fresh.mesh();
    if (w1 - prev.0).norm() >= tol || (w2 - prev.1).norm() >= tol {
        return Err(PeriodsError::ContinuationAmbiguity { t });
    }
    Ok((w1, w2))
}

impl LatticeField {
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Mesh spacing of the grid.
    pub fn spacing(&self) -> f64 {
        2.0 * self.chart.radius() / (self.n - 1) as f64
    }

    pub fn in_disc(&self, k: usize) -> bool {
        self.chart.contains(self.nodes[k])
    }

    /// Largest `|Δω| / (mesh/2)` over neighbouring nodes; below 1 when the
    /// continuity certificate holds.
    pub fn continuity_ratio(&self) -> f64 {
        neighbour_pairs(self.n)
            .map(|(p, q)| {
                let (lp, lq) = (&self.lattices[p], &self.lattices[q]);
                let d = (lp.omega1 - lq.omega1)
                    .norm()
                    .max((lp.omega2 - lq.omega2).norm());
                d / (0.5 * lp.mesh().min(lq.mesh()))
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_re,t_im,omega1_re,omega1_im,omega2_re,omega2_im\n");
        for l in &self.lattices {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                l.t.re, l.t.im, l.omega1.re, l.omega1.im, l.omega2.re, l.omega2.im
            ));
        }
        out
    }
}

/// Continues the period basis computed fresh at the chart centre over an
/// `grid_n x grid_n` grid.
pub fn lattice_continue(
    s: &EllipticSurface,
    chart: Disc,
    grid_n: usize,
) -> Result<LatticeField, PeriodsError> {
    if grid_n < 8 {
        return Err(PeriodsError::GridTooSmall(grid_n));
    }
    chart.check_against(s)?;
    let nodes = grid_nodes(&chart, grid_n);
    let fresh: Vec<FiberLattice> = nodes
        .par_iter()
        .map(|&t| fiber_periods(s, t))
        .collect::<Result<_, _>>()?;
    let reference = fiber_periods(s, chart.center())?;
    let mut lattices: Vec<Option<FiberLattice>> = vec![None; nodes.len()];
    for (k, parent) in sweep(grid_n) {
        let prev = match parent {
            Some(p) => lattices[p].expect("parent precedes child in the sweep"),
            None => reference,
        };
        lattices[k] = Some(align((prev.omega1, prev.omega2), &fresh[k])?);
    }
    let field = LatticeField {
        chart,
        n: grid_n,
        nodes,
        lattices: lattices
            .into_iter()
            .map(|l| l.expect("sweep covers the grid"))
            .collect(),
    };
    if !(field.continuity_ratio() < 1.0) {
        let t = chart.center();
        return Err(PeriodsError::ContinuationAmbiguity { t });
    }
    Ok(field)
}

/// Betti coordinates of a section over a lattice field, lifted
/// continuously from the middle node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BettiPath {
    pub section: Section,
    pub n: usize,
    pub nodes: Vec<Complex64>,
    pub beta: Vec<[f64; 2]>,
}

impl BettiPath {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_re,t_im,beta1,beta2\n");
        for (t, b) in self.nodes.iter().zip(&self.beta) {
            out.push_str(&format!("{},{},{},{}\n", t.re, t.im, b[0], b[1]));
        }
        out
    }
}

/// Betti coordinates at one node, reduced to `[0, 1)^2`. A point at the
/// identity gives `(0, 0)`.
pub(crate) fn betti_at(
    s: &EllipticSurface,
    p: &Section,
    lattice: &FiberLattice,
) -> Result<[f64; 2], PeriodsError> {
    let (x, y) = match (p.x(), p.y()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Ok([0.0, 0.0]),
    };
    let t = lattice.t;
    let hit = |_| PeriodsError::SectionHitsIdentity { t };
    let xv = x.eval(t, Precision::working()).map_err(hit)?;
    let yv = y.eval(t, Precision::working()).map_err(hit)?;
    match elliptic_log(s, t, (xv, yv), lattice) {
        Ok(z) => Ok(lattice_coords(z, lattice.omega1, lattice.omega2)),
        Err(PeriodsError::PointNearIdentity) => Ok([0.0, 0.0]),
        Err(e) => Err(e),
    }
}

pub fn betti_path(
    s: &EllipticSurface,
    p: &Section,
    field: &LatticeField,
) -> Result<BettiPath, PeriodsError> {
    let n = field.n;
    let mut path = BettiPath {
        section: p.clone(),
        n,
        nodes: field.nodes.clone(),
        beta: vec![[0.0, 0.0]; n * n],
    };
    let x = match p.x() {
        Some(x) => x,
        None => return Ok(path),
    };
    for pole in polished_roots(&x.den().squarefree_part()) {
        if field.chart.square_contains(pole) {
            return Err(PeriodsError::SectionHitsIdentity { t: pole });
        }
    }
    let raw: Vec<[f64; 2]> = field
        .lattices
        .par_iter()
        .map(|l| betti_at(s, p, l))
        .collect::<Result<_, _>>()?;
    for (k, parent) in sweep(n) {
        let r = raw[k];
        path.beta[k] = match parent {
            None => r,
            Some(q) => {
                let b = path.beta[q];
                [r[0] + (b[0] - r[0]).round(), r[1] + (b[1] - r[1]).round()]
            }
        };
    }
    for (a, b) in neighbour_pairs(n) {
        let (u, v) = (path.beta[a], path.beta[b]);
        if (u[0] - v[0]).abs() >= 0.5 || (u[1] - v[1]).abs() >= 0.5 {
            return Err(PeriodsError::UnwrapFailure { t: field.nodes[a] });
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactalg::Poly;

    fn test_surface() -> EllipticSurface {
        EllipticSurface::from_polys(Poly::from_i64s(&[0, -1]), Poly::from_i64s(&[0, 1])).unwrap()
    }

    #[test]
    fn sweep_covers_grid_once() {
        for n in [8, 9, 16] {
            let mut seen = vec![false; n * n];
            for (k, p) in sweep(n) {
                assert!(!seen[k]);
                if let Some(p) = p {
                    assert!(seen[p]);
                }
                seen[k] = true;
            }
            assert!(seen.iter().all(|&b| b));
        }
    }

    #[test]
    fn continuation_and_path() {
        let s = test_surface();
        let chart = Disc::new(Complex64::new(-1.0, 0.0), 0.3).unwrap();
        let f = lattice_continue(&s, chart, 16).unwrap();
        assert!(f.continuity_ratio() < 1.0);
        assert!(f.lattices.iter().all(|l| l.covolume() > 0.0));
        let p = Section::from_i64(1, 1);
        let path = betti_path(&s, &p, &f).unwrap();
        let first = path.beta[0];
        assert!(path.beta.iter().any(|b| (b[0] - first[0]).abs() > 1e-3));
        assert!(betti_path(&s, &Section::Zero, &f)
            .unwrap()
            .beta
            .iter()
            .all(|b| *b == [0.0, 0.0]));
    }

    #[test]
    fn rejects_bad_charts() {
        let s = test_surface();
        let chart = Disc::new(Complex64::new(0.1, 0.0), 0.3).unwrap();
        assert!(matches!(
            lattice_continue(&s, chart, 16),
            Err(PeriodsError::ChartHitsBadFiber(_))
        ));
        let chart = Disc::new(Complex64::new(-1.0, 0.0), 0.3).unwrap();
        assert!(matches!(
            lattice_continue(&s, chart, 4),
            Err(PeriodsError::GridTooSmall(4))
        ));
    }
}
