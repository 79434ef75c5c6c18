//! Exact arithmetic over Q, Q[t] and the function field Q(t).

mod poly;
mod ratfun;

pub(crate) use poly::int_mul;
pub use poly::{format_rational, parse_rational, Poly, KARATSUBA_THRESHOLD};
pub use ratfun::RatFun;

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("polynomial division left a remainder")]
    InexactDivision,
    #[error("evaluation point is a pole")]
    PoleAtPoint,
    #[error("non-finite evaluation point")]
    NonFinite,
    #[error("cannot parse rational `{0}`")]
    Parse(String),
}

/// Working precision for complex evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    /// Exact evaluation at the binary input, rounded once.
    Extended,
}

static EXTENDED: AtomicBool = AtomicBool::new(false);

impl Precision {
    /// Process-wide precision used when sections are evaluated along the
    /// base by the numerical pipeline.
    pub fn working() -> Precision {
        if EXTENDED.load(Ordering::Relaxed) {
            Precision::Extended
        } else {
            Precision::Double
        }
    }

    pub fn set_working(p: Precision) {
        EXTENDED.store(p == Precision::Extended, Ordering::Relaxed);
    }
}

/// Shorthand for `p/q` as an exact rational.
pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}
