//! Zoom sequences at points where derivative norms blow up, Brody
//! reparametrization of disc maps, and convergence probes for the
//! resulting sequences.
//!
//! Norms are those of the product Fubini–Study metric, `‖dφ(z)‖² =
//! fs_density`, measured against the standard unit vector of the disc.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms_generic::{fs_density, FormsError, ProductMap};
use crate::periods::Disc;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrodyError {
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error("derivative norms stay below {threshold} (largest {max_norm})")]
    NormBounded { max_norm: f64, threshold: f64 },
    #[error("map is constant on its disc")]
    ConstantMap,
    #[error("probe radius {probe} exceeds the radius {radius} of a map")]
    ProbeRadiusTooLarge { probe: f64, radius: f64 },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

/// `sqrt(fs_density(m, z))`.
pub fn derivative_norm(m: &ProductMap, z: Complex64) -> Result<f64, FormsError> {
    Ok(fs_density(m, z)?.sqrt())
}

/// `z -> (αz + β)/(γz + δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub delta: Complex64,
}

impl Mobius {
    pub fn affine(b: Complex64, rho: f64) -> Self {
        let c = |x: f64| Complex64::new(x, 0.0);
        Mobius {
            alpha: c(rho),
            beta: b,
            gamma: c(0.0),
            delta: c(1.0),
        }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.alpha * z + self.beta) / (self.gamma * z + self.delta)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let d = self.gamma * z + self.delta;
        (self.alpha * self.delta - self.beta * self.gamma) / (d * d)
    }

    /// `self ∘ other`.
    pub fn compose(&self, o: &Mobius) -> Mobius {
        Mobius {
            alpha: self.alpha * o.alpha + self.beta * o.gamma,
            beta: self.alpha * o.beta + self.beta * o.delta,
            gamma: self.gamma * o.alpha + self.delta * o.gamma,
            delta: self.gamma * o.beta + self.delta * o.delta,
        }
    }
}

/// A product map on the disc `|z| < radius`, read through a chart.
/// Zoomed maps have affine charts `z -> b + ρ z`; reparametrized ones
/// compose them with disc automorphisms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscMap {
    pub radius: f64,
    pub map: ProductMap,
    pub chart: Mobius,
}

impl DiscMap {
    pub fn new(
        radius: f64,
        map: ProductMap,
        center: Complex64,
        scale: f64,
    ) -> Result<Self, BrodyError> {
        if !(radius > 0.0 && scale > 0.0 && radius.is_finite() && scale.is_finite()) {
            return Err(BrodyError::InvalidOptions(
                "radius and scale must be positive".into(),
            ));
        }
        Ok(DiscMap {
            radius,
            map,
            chart: Mobius::affine(center, scale),
        })
    }

    /// Image of 0 under the chart.
    pub fn center(&self) -> Complex64 {
        self.chart.apply(Complex64::new(0.0, 0.0))
    }

    /// `|chart'(0)|`.
    pub fn scale(&self) -> f64 {
        self.chart.derivative(Complex64::new(0.0, 0.0)).norm()
    }

    /// Affine coordinates of `φ(z)`, `None` for the point at infinity.
    pub fn eval(&self, z: Complex64) -> Vec<Option<Complex64>> {
        let t = self.chart.apply(z);
        self.map
            .components()
            .iter()
            .map(|c| c.eval(t).ok().filter(|v| v.is_finite()))
            .collect()
    }

    /// `‖dφ(z)‖`.
    pub fn norm(&self, z: Complex64) -> Result<f64, FormsError> {
        Ok(self.chart.derivative(z).norm() * derivative_norm(&self.map, self.chart.apply(z))?)
    }
}

/// Points of the `n × n` grid on the square around `c` of half-width `hw`
/// that lie in the closed disc `|z - dc| <= dr`.
fn grid_in_disc(c: Complex64, hw: f64, n: usize, dc: Complex64, dr: f64) -> Vec<Complex64> {
    let step = 2.0 * hw / (n - 1) as f64;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let z = c + Complex64::new(-hw + j as f64 * step, -hw + i as f64 * step);
            if (z - dc).norm() <= dr {
                pts.push(z);
            }
        }
    }
    pts
}

/// Maximum of `f` over the closed disc `|z - dc| <= dr` by a grid that is
/// re-centred on the best node and shrunk at each level. Ties go to the
/// first node in row order.
fn grid_argmax<F>(
    f: F,
    dc: Complex64,
    dr: f64,
    n: usize,
    levels: usize,
) -> Result<(Complex64, f64), FormsError>
where
    F: Fn(Complex64) -> Result<f64, FormsError> + Sync,
{
    let mut best = (dc, f(dc)?);
    let (mut c, mut hw) = (dc, dr);
    for _ in 0..levels {
        let pts = grid_in_disc(c, hw, n, dc, dr);
        let vals: Vec<f64> = pts.par_iter().map(|&z| f(z)).collect::<Result<_, _>>()?;
        for (z, v) in pts.iter().zip(vals) {
            if v > best.1 {
                best = (*z, v);
            }
        }
        c = best.0;
        hw = 2.0 * hw / (n - 1) as f64;
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoomOptions {
    /// Largest norm across the range must exceed this.
    pub growth_threshold: f64,
    /// `D'` is the disc concentric with `D` of this many times its radius.
    pub outer_factor: f64,
    pub grid: usize,
    pub levels: usize,
}

impl Default for ZoomOptions {
    fn default() -> Self {
        ZoomOptions {
            growth_threshold: 5.0,
            outer_factor: 2.0,
            grid: 64,
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomEntry {
    pub n: i64,
    pub base_point: Complex64,
    pub scale: f64,
    /// `‖dx_n(b_n)‖`.
    pub norm: f64,
    /// `z -> x_n(b_n + r_n z)` on the unit disc.
    pub map: DiscMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomSequence {
    pub entries: Vec<ZoomEntry>,
}

impl ZoomSequence {
    /// `r_n` strictly decreasing and `r_n ‖dx_n(b_n)‖` nondecreasing.
    pub fn is_valid(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].scale < w[0].scale && w[1].scale * w[1].norm >= w[0].scale * w[0].norm)
    }
}

/// Zoom points and scales for the members `family(n)`, `n` in `ns`.
pub fn zoom_sequence(
    family: &ProductMap,
    disc: Disc,
    ns: &[i64],
    opts: &ZoomOptions,
) -> Result<ZoomSequence, BrodyError> {
    if ns.is_empty() || opts.grid < 3 || opts.levels == 0 || !(opts.outer_factor > 1.0) {
        return Err(BrodyError::InvalidOptions(
            "need indices, grid >= 3, levels >= 1 and outer_factor > 1".into(),
        ));
    }
    let outer = opts.outer_factor * disc.radius();
    let mut entries = Vec::with_capacity(ns.len());
    for &n in ns {
        let m = family.instantiate(n)?;
        let (b, norm) = grid_argmax(
            |z| derivative_norm(&m, z),
            disc.center(),
            disc.radius(),
            opts.grid,
            opts.levels,
        )?;
        let to_edge = outer - (b - disc.center()).norm();
        let r = if norm > 0.0 {
            norm.powf(-0.5).min(to_edge)
        } else {
            to_edge
        };
        entries.push(ZoomEntry {
            n,
            base_point: b,
            scale: r,
            norm,
            map: DiscMap::new(1.0, m, b, r)?,
        });
    }
    let max_norm = entries.iter().map(|e| e.norm).fold(0.0, f64::max);
    if !(max_norm > opts.growth_threshold) {
        return Err(BrodyError::NormBounded {
            max_norm,
            threshold: opts.growth_threshold,
        });
    }
    Ok(ZoomSequence { entries })
}

/// `ψ = φ ∘ (z -> r A(z/R))` with `A` the disc automorphism moving 0 to the
/// maximiser `ζ0` of `μ(ζ) = r ‖dφ(rζ)‖ (1 - |ζ|²)` and `R = μ(ζ0)/c`, so that
/// `‖dψ(0)‖ = c` and `‖dψ(w)‖ <= c R²/(R² - |w|²)` up to the grid error of
/// the maximisation.
pub fn brody_reparametrize(phi: &DiscMap, target_c: f64) -> Result<DiscMap, BrodyError> {
    if !(target_c > 0.0 && target_c.is_finite()) {
        return Err(BrodyError::InvalidOptions(
            "target_c must be positive".into(),
        ));
    }
    let r = phi.radius;
    let mu = |zeta: Complex64| -> Result<f64, FormsError> {
        let w = 1.0 - zeta.norm_sqr();
        if w <= 0.0 {
            return Ok(0.0);
        }
        Ok(r * phi.norm(r * zeta)? * w)
    };
    let zero = Complex64::new(0.0, 0.0);
    let (z0, m) = grid_argmax(mu, zero, 1.0, 64, 3)?;
    if !(m > 0.0) {
        return Err(BrodyError::ConstantMap);
    }
    let big_r = m / target_c;
    let one = Complex64::new(1.0, 0.0);
    // z -> r (z/R + ζ0)/(1 + conj(ζ0) z/R)
    let inner = Mobius {
        alpha: Complex64::new(r / big_r, 0.0),
        beta: r * z0,
        gamma: z0.conj() / big_r,
        delta: one,
    };
    Ok(DiscMap {
        radius: big_r,
        map: phi.map.clone(),
        chart: phi.chart.compose(&inner),
    })
}

/// `max ‖dψ(z)‖ (R² - |z|²)/R²` over the grid points of the open disc of
/// `psi`; at most `‖dψ(0)‖` up to grid slack after reparametrization.
pub fn interior_ratio(psi: &DiscMap, grid_n: usize) -> Result<f64, BrodyError> {
    if grid_n < 2 {
        return Err(BrodyError::InvalidOptions("grid_n >= 2".into()));
    }
    let r = psi.radius;
    let zero = Complex64::new(0.0, 0.0);
    let pts = grid_in_disc(zero, r, grid_n, zero, r);
    let vals: Vec<f64> = pts
        .par_iter()
        .filter(|z| z.norm() < r)
        .map(|&z| psi.norm(z).map(|v| v * (r * r - z.norm_sqr()) / (r * r)))
        .collect::<Result<_, _>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

fn chordal(p: Option<Complex64>, q: Option<Complex64>) -> f64 {
    match (p, q) {
        (Some(p), Some(q)) => (p - q).norm() / ((1.0 + p.norm_sqr()) * (1.0 + q.norm_sqr())).sqrt(),
        (Some(v), None) | (None, Some(v)) => 1.0 / (1.0 + v.norm_sqr()).sqrt(),
        (None, None) => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub z: Complex64,
    pub coords: Vec<Option<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub cauchy: bool,
    /// Sup chordal distance between consecutive maps on the probe grid.
    pub distances: Vec<f64>,
    /// Diameter of the first coordinate's image under the last map.
    pub verticality: f64,
    pub limit_samples: Vec<LimitSample>,
}

impl ProbeReport {
    /// Columns `z_re, z_im, coord_1, coord_2, ...`; a coordinate is written
    /// as `re+imi`, or `inf`.
    pub fn samples_csv(&self) -> String {
        let k = self.limit_samples.first().map_or(0, |s| s.coords.len());
        let mut out = String::from("z_re,z_im");
        for i in 1..=k {
            out.push_str(&format!(",coord_{i}"));
        }
        out.push('\n');
        for s in &self.limit_samples {
            out.push_str(&format!("{},{}", s.z.re, s.z.im));
            for c in &s.coords {
                match c {
                    Some(v) => out.push_str(&format!(",{}{:+}i", v.re, v.im)),
                    None => out.push_str(",inf"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Compares consecutive maps of `seq` on the `grid_n × grid_n` grid of
/// the disc of radius `probe_radius`.
pub fn limit_probe(
    seq: &[DiscMap],
    probe_radius: f64,
    grid_n: usize,
    tol: f64,
) -> Result<ProbeReport, BrodyError> {
    if seq.is_empty() || grid_n < 2 || !(probe_radius > 0.0) || !(tol > 0.0) {
        return Err(BrodyError::InvalidOptions(
            "need maps, grid_n >= 2, positive radius and tol".into(),
        ));
    }
    if let Some(m) = seq.iter().find(|m| m.radius < probe_radius) {
        return Err(BrodyError::ProbeRadiusTooLarge {
            probe: probe_radius,
            radius: m.radius,
        });
    }
    let k = seq[0].map.components().len();
    if seq.iter().any(|m| m.map.components().len() != k) {
        return Err(BrodyError::InvalidOptions(
            "maps have different numbers of factors".into(),
        ));
    }
    let zero = Complex64::new(0.0, 0.0);
    let grid = grid_in_disc(zero, probe_radius, grid_n, zero, probe_radius);
    let values: Vec<Vec<Vec<Option<Complex64>>>> = seq
        .iter()
        .map(|m| grid.par_iter().map(|&z| m.eval(z)).collect())
        .collect();
    let distances: Vec<f64> = values
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| chordal(*p, *q)))
                .fold(0.0, f64::max)
        })
        .collect();
    let last = values.last().expect("nonempty");
    let firsts: Vec<Complex64> = last
        .iter()
        .filter_map(|v| v.first().copied().flatten())
        .collect();
    let mut verticality: f64 = 0.0;
    for (i, a) in firsts.iter().enumerate() {
        for b in &firsts[i + 1..] {
            verticality = verticality.max((a - b).norm());
        }
    }
    if firsts.len() < last.len() {
        verticality = f64::INFINITY;
    }
    Ok(ProbeReport {
        cauchy: distances.last().map_or(true, |d| *d < tol),
        distances,
        verticality,
        limit_samples: grid
            .iter()
            .zip(last)
            .map(|(z, c)| LimitSample {
                z: *z,
                coords: c.clone(),
            })
            .collect(),
    })
}
