//! Heights of sections of elliptic surfaces over `C(t)`.
//!
//! The crate pairs an exact pipeline (function-field arithmetic, the group
//! law on sections, Tate's doubling limit) with an analytic one (period
//! lattices by the complex AGM, elliptic logarithms, Betti coordinates and
//! the Betti form density), so that canonical heights can be computed both
//! as degree limits and as integrals over the base. Alongside sit generic
//! Fubini–Study partial heights on products of projective lines and the Brody
//! zoom/reparametrization machinery for disc maps.

pub mod betti_heights;
pub mod brody;
pub mod exactalg;
pub mod forms_generic;
pub mod numeric;
pub mod periods;
pub mod weierstrass;

pub use exactalg::{AlgebraError, Poly, Precision, RatFun};
pub use periods::Disc;
pub use weierstrass::{EllipticSurface, Section};
