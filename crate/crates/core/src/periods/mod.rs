//! Fiber roots, period lattices, elliptic logarithms and the continued
//! lattice field over a disc in the base, giving Betti coordinates of
//! sections.
//!
//! Conventions: on the fiber `y^2 = x^3 + a x + b` the invariant
//! differential is `dx/y`, so `x = 4℘(z)` and `y = 4℘'(z)` for the lattice
//! `Λ` of periods of `dx/y`.

mod field;
mod lattice;
pub mod special;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weierstrass::EllipticSurface;

pub(crate) use field::align_basis;
pub use field::{betti_path, lattice_continue, BettiPath, LatticeField};
pub use lattice::{
    elliptic_log, fiber_periods, fiber_roots, lattice_coords, wp_fiber, FiberLattice,
};
pub(crate) use lattice::{elliptic_log_raw, fiber_periods_unlabelled};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodsError {
    #[error("fiber at t = {t} is singular or nearly so")]
    NearSingularFiber { t: Complex64 },
    #[error("AGM did not converge at t = {t}")]
    AGMNonConvergence { t: Complex64 },
    #[error("point is within 1e-8 of the identity")]
    PointNearIdentity,
    #[error("elliptic log residual {residual:e} above tolerance")]
    InversionResidual { residual: f64 },
    #[error("period continuation ambiguous near t = {t}; refine the grid")]
    ContinuationAmbiguity { t: Complex64 },
    #[error("section meets the zero section inside the chart near t = {t}")]
    SectionHitsIdentity { t: Complex64 },
    #[error("Betti coordinates could not be lifted continuously near t = {t}")]
    UnwrapFailure { t: Complex64 },
    #[error("invalid disc: {0}")]
    InvalidDisc(String),
    #[error("chart meets the bad fiber at {0}")]
    ChartHitsBadFiber(Complex64),
    #[error("grid size {0} is below the minimum of 8")]
    GridTooSmall(usize),
}

/// Closed disc in the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiscRepr", into = "DiscRepr")]
pub struct Disc {
    center: Complex64,
    radius: f64,
}

#[derive(Serialize, Deserialize)]
struct DiscRepr {
    center: [f64; 2],
    radius: f64,
}

impl TryFrom<DiscRepr> for Disc {
    type Error = PeriodsError;
    fn try_from(r: DiscRepr) -> Result<Self, Self::Error> {
        Disc::new(Complex64::new(r.center[0], r.center[1]), r.radius)
    }
}

impl From<Disc> for DiscRepr {
    fn from(d: Disc) -> Self {
        DiscRepr {
            center: [d.center.re, d.center.im],
            radius: d.radius,
        }
    }
}

impl Disc {
    pub fn new(center: Complex64, radius: f64) -> Result<Self, PeriodsError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PeriodsError::InvalidDisc(format!(
                "radius {radius} must be positive"
            )));
        }
        if !center.is_finite() {
            return Err(PeriodsError::InvalidDisc("center is not finite".into()));
        }
        Ok(Disc { center, radius })
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, t: Complex64) -> bool {
        (t - self.center).norm() <= self.radius
    }

    /// True when `t` lies in the closed bounding square.
    pub fn square_contains(&self, t: Complex64) -> bool {
        let d = t - self.center;
        d.re.abs() <= self.radius && d.im.abs() <= self.radius
    }

    /// Errors if the bounding square of the disc meets a finite bad fiber.
    /// The grid covers the whole square, so the check is on the square.
    pub fn check_against(&self, s: &EllipticSurface) -> Result<(), PeriodsError> {
        for f in s.bad_fibers() {
            if self.square_contains(f.location) {
                return Err(PeriodsError::ChartHitsBadFiber(f.location));
            }
        }
        Ok(())
    }
}
