//! Partial heights over discs by grid refinement, and the quantities built
//! from them on shared grids: pairing, Gram matrix, non-degeneracy ratio.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::density::betti_density;
use super::{HeightError, HeightReport, Level, BUNDLE_DEGREE};
use crate::periods::{betti_path, lattice_continue, Disc, PeriodsError};
use crate::weierstrass::{EllipticSurface, Section, DEFAULT_TATE_ITERS};

/// Grid refinement `n -> 2n - 1` (nested grids) until successive values
/// change by less than `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadOptions {
    pub tol: f64,
    pub max_levels: usize,
    pub initial_n: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            tol: 1e-7,
            max_levels: 5,
            initial_n: 33,
        }
    }
}

impl QuadOptions {
    fn validate(&self) -> Result<(), HeightError> {
        if !(self.tol > 0.0) {
            return Err(HeightError::InvalidOptions("tol must be positive".into()));
        }
        if self.max_levels < 2 {
            return Err(HeightError::InvalidOptions(
                "max_levels must be at least 2".into(),
            ));
        }
        if self.initial_n < 8 {
            return Err(HeightError::InvalidOptions(
                "initial_n must be at least 8".into(),
            ));
        }
        Ok(())
    }
}

/// Partial heights of several sections refined together on the same grids.
pub fn partial_heights(
    s: &EllipticSurface,
    sections: &[Section],
    disc: Disc,
    opts: &QuadOptions,
) -> Result<Vec<HeightReport>, HeightError> {
    opts.validate()?;
    let mut levels: Vec<Vec<Level>> = vec![Vec::new(); sections.len()];
    let mut n = opts.initial_n;
    let mut delta = f64::INFINITY;
    let mut used = 0;
    for level in 0..opts.max_levels {
        used = level + 1;
        let field = match lattice_continue(s, disc, n) {
            Ok(f) => f,
            Err(PeriodsError::ContinuationAmbiguity { .. }) if level + 1 < opts.max_levels => {
                n = 2 * n - 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for (p, lv) in sections.iter().zip(levels.iter_mut()) {
            let value = if p.is_zero() {
                0.0
            } else {
                let path = betti_path(s, p, &field)?;
                betti_density(&field, &path, BUNDLE_DEGREE)?.integrate()
            };
            lv.push(Level { n, value });
        }
        delta = levels
            .iter()
            .map(|lv| match lv.len() {
                0 | 1 => f64::INFINITY,
                k => (lv[k - 1].value - lv[k - 2].value).abs(),
            })
            .fold(0.0, f64::max);
        if delta < opts.tol {
            return Ok(levels
                .into_iter()
                .map(|lv| HeightReport::from_levels(lv, 0.0))
                .collect());
        }
        n = 2 * n - 1;
    }
    Err(HeightError::QuadratureStalled {
        levels: used,
        delta,
    })
}

/// `∫_D s*ω` by the cut-cell midpoint rule on refined grids.
pub fn partial_height(
    s: &EllipticSurface,
    p: &Section,
    disc: Disc,
    opts: &QuadOptions,
) -> Result<HeightReport, HeightError> {
    Ok(partial_heights(s, std::slice::from_ref(p), disc, opts)?.remove(0))
}

fn combine(reports: &[HeightReport], coeffs: &[f64]) -> HeightReport {
    let k = reports[0].levels.len();
    let levels = (0..k)
        .map(|i| Level {
            n: reports[0].levels[i].n,
            value: reports
                .iter()
                .zip(coeffs)
                .map(|(r, c)| c * r.levels[i].value)
                .sum(),
        })
        .collect();
    let error = reports
        .iter()
        .zip(coeffs)
        .map(|(r, c)| c.abs() * r.error)
        .sum();
    HeightReport {
        value: reports.iter().zip(coeffs).map(|(r, c)| c * r.value).sum(),
        error,
        levels,
    }
}

/// `½(h(P+Q) - h(P) - h(Q))` with all three heights on the same grids.
pub fn pairing(
    s: &EllipticSurface,
    p: &Section,
    q: &Section,
    disc: Disc,
    opts: &QuadOptions,
) -> Result<HeightReport, HeightError> {
    let sections = [s.section_add(p, q), p.clone(), q.clone()];
    let reports = partial_heights(s, &sections, disc, opts)?;
    Ok(combine(&reports, &[0.5, -0.5, -0.5]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub determinant: f64,
    /// Largest error bound of an entry.
    pub error: f64,
}

/// Gram matrix of the pairing over `disc`.
pub fn gram(
    s: &EllipticSurface,
    sections: &[Section],
    disc: Disc,
    opts: &QuadOptions,
) -> Result<GramReport, HeightError> {
    let k = sections.len();
    let mut all: Vec<Section> = sections.to_vec();
    let mut sum_index = vec![vec![0usize; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            sum_index[i][j] = all.len();
            all.push(s.section_add(&sections[i], &sections[j]));
        }
    }
    let reports = partial_heights(s, &all, disc, opts)?;
    let mut m = DMatrix::<f64>::zeros(k, k);
    let mut err = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = reports[i].value;
        err[(i, i)] = reports[i].error;
        for j in i + 1..k {
            let r = &reports[sum_index[i][j]];
            let v = 0.5 * (r.value - reports[i].value - reports[j].value);
            let e = 0.5 * (r.error + reports[i].error + reports[j].error);
            m[(i, j)] = v;
            m[(j, i)] = v;
            err[(i, j)] = e;
            err[(j, i)] = e;
        }
    }
    let sym = 0.5 * (&m + m.transpose());
    let eig = SymmetricEigen::new(sym.clone());
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(GramReport {
        matrix: (0..k)
            .map(|i| (0..k).map(|j| sym[(i, j)]).collect())
            .collect(),
        min_eigenvalue: eigenvalues.first().copied().unwrap_or(0.0),
        eigenvalues,
        determinant: if k == 0 { 1.0 } else { sym.determinant() },
        error: err.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegRow {
    pub m: i64,
    pub partial: f64,
    pub partial_error: f64,
    pub tate: f64,
    pub ratio: f64,
}

/// `h_D(mP) / ĥ(mP)` for `m = 1..=m_max`, partial heights on shared grids.
pub fn nondeg_ratio(
    s: &EllipticSurface,
    p: &Section,
    disc: Disc,
    m_max: i64,
    opts: &QuadOptions,
) -> Result<Vec<NondegRow>, HeightError> {
    let multiples: Vec<Section> = (1..=m_max).map(|m| s.section_mul(m, p)).collect();
    let mut tates = Vec::with_capacity(multiples.len());
    for (m, q) in (1..=m_max).zip(&multiples) {
        let tate = s.tate_height(q, DEFAULT_TATE_ITERS)?.value;
        if tate == 0.0 {
            return Err(HeightError::DegenerateDenominator { m });
        }
        tates.push(tate);
    }
    let reports = partial_heights(s, &multiples, disc, opts)?;
    Ok((1..=m_max)
        .zip(reports.iter().zip(tates))
        .map(|(m, (r, tate))| NondegRow {
            m,
            partial: r.value,
            partial_error: r.error,
            tate,
            ratio: r.value / tate,
        })
        .collect())
}
