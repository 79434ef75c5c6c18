//! Betti form densities along sections, partial heights over discs, the
//! full height over the base, the polarised pairing, Gram matrices and the
//! non-degeneracy ratio.
//!
//! The Betti form is normalised to have fiber integral 2, so its integral
//! over the whole base equals the limit `4^{-n} deg x(2^n P)`.

mod density;
mod full;
mod partial;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::periods::PeriodsError;
use crate::weierstrass::WeierstrassError;

pub use density::{betti_density, pointwise_density, DensityGrid};
pub use full::{full_height, full_height_with, FullHeightOptions};
pub use partial::{
    gram, nondeg_ratio, pairing, partial_height, partial_heights, GramReport, NondegRow,
    QuadOptions,
};

/// Fiber integral of the Betti form.
pub const BUNDLE_DEGREE: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeightError {
    #[error(transparent)]
    Periods(#[from] PeriodsError),
    #[error(transparent)]
    Weierstrass(#[from] WeierstrassError),
    #[error("path and lattice field are on different grids")]
    GridMismatch,
    #[error("quadrature did not settle after {levels} levels (last change {delta:e})")]
    QuadratureStalled { levels: usize, delta: f64 },
    #[error("excision discs of radius {radius} overlap or leave their chart")]
    OverlappingExcisions { radius: f64 },
    #[error("canonical height of {m}P vanishes")]
    DegenerateDenominator { m: i64 },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

/// One refinement level of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: usize,
    pub value: f64,
}

/// Result of a refined quadrature: the finest value and the last change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightReport {
    pub value: f64,
    pub error: f64,
    pub levels: Vec<Level>,
}

impl HeightReport {
    pub(crate) fn from_levels(levels: Vec<Level>, extra_error: f64) -> Self {
        let value = levels.last().map_or(0.0, |l| l.value);
        let delta = match levels.len() {
            0 | 1 => 0.0,
            k => (levels[k - 1].value - levels[k - 2].value).abs(),
        };
        HeightReport {
            value,
            error: delta + extra_error,
            levels,
        }
    }

    pub fn zero() -> Self {
        HeightReport {
            value: 0.0,
            error: 0.0,
            levels: Vec::new(),
        }
    }
}
