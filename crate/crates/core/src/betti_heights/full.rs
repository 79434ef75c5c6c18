//! Integral of the Betti form density over the whole projective line.
//!
//! Two charts, `|t| <= R0` and `|w| <= 1/R0` with `w = 1/t`, are integrated
//! in polar coordinates around their centres. A smooth cut-off of radius
//! `excision_radius` splits off every bad fiber; near it the density is
//! integrated on dyadic log-polar shells down to
//! `excision_radius · 2^{-shells}`, and the remaining inner mass is
//! extrapolated from the last shells: `C/(log(1/r) + B)^2` at fibers where
//! `j` has a pole, a geometric series elsewhere.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{density_in, Coordinate};
use super::{HeightError, HeightReport, Level, BUNDLE_DEGREE};
use crate::numeric::{compensated_sum, composite_gauss, gauss_legendre, smooth_cutoff};
use crate::weierstrass::{EllipticSurface, Section};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FullHeightOptions {
    /// Radius of the affine chart; moved within `[1.25, 4]` if a bad fiber
    /// sits too close to the seam.
    pub r0: f64,
    pub excision_radius: f64,
    /// Number of dyadic shells inside each excision disc.
    pub shells: usize,
    pub gauss_order: usize,
    pub base_panels: usize,
    pub base_angles: usize,
    pub max_refinements: usize,
    pub tol: f64,
}

impl Default for FullHeightOptions {
    fn default() -> Self {
        FullHeightOptions {
            r0: 2.0,
            excision_radius: 0.05,
            shells: 24,
            gauss_order: 8,
            base_panels: 12,
            base_angles: 48,
            max_refinements: 3,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Singular {
    chart: usize,
    at: Complex64,
    multiplicative: bool,
}

#[derive(Debug, Clone, Copy)]
struct Chart {
    coord: Coordinate,
    radius: f64,
}

struct Layout {
    charts: [Chart; 2],
    singular: Vec<Singular>,
    /// Every bad point in each chart's coordinate, for stencil sizes.
    obstacles: [Vec<Complex64>; 2],
}

fn layout(s: &EllipticSurface, r0: f64, rex: f64) -> Option<Layout> {
    let charts = [
        Chart {
            coord: Coordinate::Affine,
            radius: r0,
        },
        Chart {
            coord: Coordinate::Inverse,
            radius: 1.0 / r0,
        },
    ];
    let mut singular = Vec::new();
    let mut obstacles: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
    for f in s.bad_fibers() {
        let t = f.location;
        obstacles[0].push(t);
        if t.norm() > 0.0 {
            obstacles[1].push(1.0 / t);
        }
        let (chart, at) = if t.norm() < r0 { (0, t) } else { (1, 1.0 / t) };
        singular.push(Singular {
            chart,
            at,
            multiplicative: f.multiplicative,
        });
    }
    let inf = s.infinity();
    if inf.bad {
        obstacles[1].push(Complex64::new(0.0, 0.0));
        singular.push(Singular {
            chart: 1,
            at: Complex64::new(0.0, 0.0),
            multiplicative: inf.multiplicative,
        });
    }
    for (i, a) in singular.iter().enumerate() {
        if a.at.norm() + rex >= charts[a.chart].radius {
            return None;
        }
        for b in &singular[i + 1..] {
            if a.chart == b.chart && (a.at - b.at).norm() < 2.0 * rex {
                return None;
            }
        }
    }
    Some(Layout {
        charts,
        singular,
        obstacles,
    })
}

fn choose_layout(s: &EllipticSurface, opts: &FullHeightOptions) -> Result<Layout, HeightError> {
    let candidates = std::iter::once(opts.r0).chain((0..=55).map(|k| 1.25 + 0.05 * k as f64));
    for r0 in candidates {
        if let Some(l) = layout(s, r0, opts.excision_radius) {
            return Ok(l);
        }
    }
    Err(HeightError::OverlappingExcisions {
        radius: opts.excision_radius,
    })
}

fn stencil_step(obstacles: &[Complex64], xi: Complex64) -> f64 {
    let d = obstacles
        .iter()
        .map(|o| (xi - o).norm())
        .fold(1.0, f64::min);
    1e-4 * d
}

/// Density with respect to the chart coordinate's area.
fn rho(
    s: &EllipticSurface,
    p: &Section,
    lay: &Layout,
    chart: usize,
    xi: Complex64,
) -> Result<f64, HeightError> {
    let h = stencil_step(&lay.obstacles[chart], xi);
    Ok(density_in(
        s,
        p,
        lay.charts[chart].coord,
        xi,
        h,
        BUNDLE_DEGREE,
    )?)
}

/// Polar integral of `(1 - Σ χ_b) ρ` over one chart disc.
fn smooth_part(
    s: &EllipticSurface,
    p: &Section,
    lay: &Layout,
    chart: usize,
    opts: &FullHeightOptions,
    level: usize,
) -> Result<f64, HeightError> {
    let rex = opts.excision_radius;
    let radius = lay.charts[chart].radius;
    // panel breaks where the cut-offs switch on and off
    let mut breaks = vec![0.0, radius];
    for b in lay.singular.iter().filter(|b| b.chart == chart) {
        let d = b.at.norm();
        for e in [-rex, -rex / 2.0, rex / 2.0, rex] {
            if d + e > 0.0 && d + e < radius {
                breaks.push(d + e);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let per_unit = (opts.base_panels << level) as f64 / radius;
    let radial: Vec<(f64, f64)> = breaks
        .windows(2)
        .flat_map(|w| {
            let panels = ((w[1] - w[0]) * per_unit).ceil().max(1.0) as usize;
            composite_gauss(w[0], w[1], panels, opts.gauss_order)
        })
        .collect();
    let na = opts.base_angles << level;
    let dth = 2.0 * PI / na as f64;
    let centres: Vec<Complex64> = lay
        .singular
        .iter()
        .filter(|b| b.chart == chart)
        .map(|b| b.at)
        .collect();
    let points: Vec<(Complex64, f64)> = radial
        .iter()
        .flat_map(|&(r, w)| {
            (0..na).map(move |k| {
                (
                    Complex64::from_polar(r, (k as f64 + 0.5) * dth),
                    w * r * dth,
                )
            })
        })
        .filter_map(|(xi, w)| {
            let cut: f64 = centres
                .iter()
                .map(|c| smooth_cutoff((xi - c).norm(), rex / 2.0, rex))
                .sum();
            let weight = 1.0 - cut;
            (weight > 0.0).then_some((xi, w * weight))
        })
        .collect();
    let terms: Vec<f64> = points
        .par_iter()
        .map(|&(xi, w)| rho(s, p, lay, chart, xi).map(|v| v * w))
        .collect::<Result<_, _>>()?;
    Ok(compensated_sum(terms))
}

/// Masses of the dyadic shells `[rex 2^{-k-1}, rex 2^{-k}]` around `b`,
/// the outermost one weighted by the cut-off.
fn shell_masses(
    s: &EllipticSurface,
    p: &Section,
    lay: &Layout,
    b: &Singular,
    opts: &FullHeightOptions,
    level: usize,
) -> Result<Vec<f64>, HeightError> {
    let rex = opts.excision_radius;
    let (gx, gw) = gauss_legendre(opts.gauss_order);
    let na = opts.base_angles << level;
    let dth = 2.0 * PI / na as f64;
    let mut masses = Vec::with_capacity(opts.shells);
    for k in 0..opts.shells {
        let hi = (rex * 0.5f64.powi(k as i32)).ln();
        let width = 2f64.ln();
        let mut pts = Vec::new();
        for (x, w) in gx.iter().zip(&gw) {
            let u = hi - width + 0.5 * width * (x + 1.0);
            let r = u.exp();
            let chi = smooth_cutoff(r, rex / 2.0, rex);
            for a in 0..na {
                let th = (a as f64 + 0.5) * dth + 0.5 * dth * (k % 2) as f64;
                pts.push((
                    b.at + Complex64::from_polar(r, th),
                    0.5 * width * w * r * r * dth * chi,
                ));
            }
        }
        let terms: Vec<f64> = pts
            .par_iter()
            .map(|&(xi, w)| {
                if w == 0.0 {
                    Ok(0.0)
                } else {
                    rho(s, p, lay, b.chart, xi).map(|v| v * w)
                }
            })
            .collect::<Result<_, _>>()?;
        masses.push(compensated_sum(terms));
    }
    Ok(masses)
}

/// Inner mass beyond the last shell and a spread estimate, from the model
/// fitted to shells `k0, k0 + 1`.
fn tail_from(masses: &[f64], k0: usize, rex: f64, multiplicative: bool) -> Option<f64> {
    let (ma, mb) = (masses[k0], masses[k0 + 1]);
    if !(ma > 0.0 && mb > 0.0) {
        return None;
    }
    let ratio = mb / ma;
    if !(ratio < 1.0) {
        return None;
    }
    let kend = masses.len();
    if !multiplicative {
        return Some(mb * ratio.powi((kend - k0 - 2) as i32) * ratio / (1.0 - ratio));
    }
    let ln2 = 2f64.ln();
    let l = |k: usize| (1.0 / rex).ln() + k as f64 * ln2;
    let g = |ll: f64, b: f64| 1.0 / ((ll + b) * (ll + b));
    let shell = |k: usize, b: f64| g(l(k), b) - g(l(k + 1), b);
    let model_ratio = |b: f64| shell(k0 + 1, b) / shell(k0, b);
    let (mut lo, mut hi) = (-l(k0) + 1e-9, 1e7);
    if !(model_ratio(lo) < ratio && model_ratio(hi) > ratio) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model_ratio(mid) < ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = 0.5 * (lo + hi);
    let c = ma / shell(k0, b);
    Some(c * g(l(kend), b))
}

/// Tail estimate and its uncertainty.
fn tail(masses: &[f64], rex: f64, multiplicative: bool) -> (f64, f64) {
    let k = masses.len();
    let last = masses[k - 1].abs();
    if k < 4 || last == 0.0 {
        return (0.0, last);
    }
    match (
        tail_from(masses, k - 2, rex, multiplicative),
        tail_from(masses, k - 3, rex, multiplicative),
    ) {
        (Some(a), Some(b)) => (a, (a - b).abs()),
        (Some(a), None) => (a, a),
        _ => (0.0, last * k as f64),
    }
}

pub fn full_height(
    s: &EllipticSurface,
    p: &Section,
    excision_radius: f64,
    levels: usize,
) -> Result<HeightReport, HeightError> {
    let opts = FullHeightOptions {
        excision_radius,
        shells: levels,
        ..FullHeightOptions::default()
    };
    full_height_with(s, p, &opts)
}

pub fn full_height_with(
    s: &EllipticSurface,
    p: &Section,
    opts: &FullHeightOptions,
) -> Result<HeightReport, HeightError> {
    if !(opts.excision_radius > 0.0) || opts.shells < 4 || opts.max_refinements == 0 {
        return Err(HeightError::InvalidOptions(
            "excision radius must be positive, shells >= 4, max_refinements >= 1".into(),
        ));
    }
    let lay = choose_layout(s, opts)?;
    if p.is_zero() {
        return Ok(HeightReport::zero());
    }
    let mut levels = Vec::new();
    let mut tail_err = 0.0;
    // shell sums settle long before the smooth parts; refine them once
    let mut shells: Vec<Vec<f64>> = Vec::new();
    for level in 0..opts.max_refinements {
        let mut parts = Vec::new();
        for chart in 0..2 {
            parts.push(smooth_part(s, p, &lay, chart, opts, level)?);
        }
        if level < 2 {
            shells = lay
                .singular
                .iter()
                .map(|b| shell_masses(s, p, &lay, b, opts, level))
                .collect::<Result<_, _>>()?;
        }
        tail_err = 0.0;
        for (b, masses) in lay.singular.iter().zip(&shells) {
            let (t, e) = tail(masses, opts.excision_radius, b.multiplicative);
            parts.extend(masses.iter().copied());
            parts.push(t);
            tail_err += e;
        }
        levels.push(Level {
            n: level,
            value: compensated_sum(parts),
        });
        let k = levels.len();
        if k >= 2 && (levels[k - 1].value - levels[k - 2].value).abs() < opts.tol {
            break;
        }
    }
    Ok(HeightReport::from_levels(levels, tail_err))
}
