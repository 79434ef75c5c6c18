//! Rational functions in one variable over Q, kept in lowest terms with a
//! monic denominator so that structural equality is field equality.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::poly::{ratio_to_f64, Poly};
use super::{AlgebraError, Precision};

#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RatFun {
    num: Poly,
    den: Poly,
}

#[derive(Deserialize)]
struct RatFunRepr {
    num: Poly,
    #[serde(default = "Poly::one")]
    den: Poly,
}

impl<'de> Deserialize<'de> for RatFun {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RatFunRepr::deserialize(d)?;
        RatFun::new(r.num, r.den).map_err(serde::de::Error::custom)
    }
}

impl RatFun {
    /// Builds `num/den` and reduces it.
    pub fn new(num: Poly, den: Poly) -> Result<Self, AlgebraError> {
        if den.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(Self::reduce(num, den))
    }

    fn reduce(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return RatFun::zero();
        }
        let (num, den) = if den.is_constant() {
            (num, den)
        } else {
            let g = num.gcd(&den);
            if g.is_constant() {
                (num, den)
            } else {
                (
                    num.exact_div(&g).expect("gcd divides numerator"),
                    den.exact_div(&g).expect("gcd divides denominator"),
                )
            }
        };
        Self::with_monic_den(num, den)
    }

    fn with_monic_den(num: Poly, den: Poly) -> Self {
        let lc = den.leading().expect("nonzero denominator").clone();
        if lc.is_one() {
            RatFun { num, den }
        } else {
            let inv = lc.recip();
            RatFun {
                num: num.scale(&inv),
                den: den.scale(&inv),
            }
        }
    }

    /// Assembles `num/den` whose common factors are known to be supported on
    /// the roots of `support`; only those candidates are divided out, which
    /// avoids a full Euclidean gcd on large operands.
    pub fn from_parts_with_support(
        mut num: Poly,
        mut den: Poly,
        support: &Poly,
    ) -> Result<Self, AlgebraError> {
        if den.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(RatFun::zero());
        }
        if !support.is_constant() {
            loop {
                let rn = num.rem(support)?;
                let rd = den.rem(support)?;
                let h = support.gcd(&rn).gcd(&rd);
                if h.is_constant() {
                    break;
                }
                num = num.exact_div(&h)?;
                den = den.exact_div(&h)?;
            }
        }
        Ok(Self::with_monic_den(num, den))
    }

    pub fn zero() -> Self {
        RatFun {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        RatFun::from_poly(Poly::one())
    }

    pub fn t() -> Self {
        RatFun::from_poly(Poly::t())
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFun {
            num: p,
            den: Poly::one(),
        }
    }

    pub fn from_i64(c: i64) -> Self {
        RatFun::from_poly(Poly::from_i64s(&[c]))
    }

    pub fn constant(c: BigRational) -> Self {
        RatFun::from_poly(Poly::constant(c))
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_constant()
    }

    /// Degree of `f` as a morphism `P^1 → P^1`; the zero function has degree 0.
    pub fn degree(&self) -> usize {
        self.num.degree_or_zero().max(self.den.degree_or_zero())
    }

    /// Order of the pole at infinity (negative for a zero there).
    pub fn pole_order_at_infinity(&self) -> i64 {
        if self.is_zero() {
            return i64::MIN;
        }
        self.num.degree_or_zero() as i64 - self.den.degree_or_zero() as i64
    }

    pub fn checked_div(&self, rhs: &RatFun) -> Result<RatFun, AlgebraError> {
        if rhs.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        RatFun::new(&self.num * &rhs.den, &self.den * &rhs.num)
    }

    pub fn recip(&self) -> Result<RatFun, AlgebraError> {
        RatFun::one().checked_div(self)
    }

    pub fn pow(&self, e: u32) -> RatFun {
        // powers of coprime polynomials stay coprime
        Self::with_monic_den(self.num.pow(e), self.den.pow(e))
    }

    pub fn scale(&self, c: &BigRational) -> RatFun {
        if c.is_zero() {
            return RatFun::zero();
        }
        RatFun {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn scale_i64(&self, c: i64) -> RatFun {
        self.scale(&BigRational::from_integer(BigInt::from(c)))
    }

    /// `t^k · f(1/t)`, i.e. the same function read in the chart `w = 1/t`
    /// and multiplied by `w^k` (`k` may be negative).
    pub fn in_inverse_chart(&self, k: i64) -> RatFun {
        if self.is_zero() {
            return RatFun::zero();
        }
        let dn = self.num.degree_or_zero();
        let dd = self.den.degree_or_zero();
        // f(1/w) = w^{dd - dn} · rev(num)/rev(den)
        let shift = k + dd as i64 - dn as i64;
        let mut num = self.num.reversed(dn);
        let mut den = self.den.reversed(dd);
        if shift >= 0 {
            num = num.shift(shift as usize);
        } else {
            den = den.shift((-shift) as usize);
        }
        RatFun::reduce(num, den)
    }

    pub fn eval_rational(&self, x: &BigRational) -> Result<BigRational, AlgebraError> {
        let d = self.den.eval_rational(x);
        if d.is_zero() {
            return Err(AlgebraError::PoleAtPoint);
        }
        Ok(self.num.eval_rational(x) / d)
    }

    /// Numerical value at a complex point.
    pub fn eval(&self, z: Complex64, precision: Precision) -> Result<Complex64, AlgebraError> {
        match precision {
            Precision::Double => self.eval_double(z),
            Precision::Extended => self.eval_extended(z),
        }
    }

    fn pole_threshold(&self, z: Complex64) -> f64 {
        1e-12 * (1.0 + z.norm()).powi(self.den.degree_or_zero() as i32)
    }

    fn eval_double(&self, z: Complex64) -> Result<Complex64, AlgebraError> {
        let d = self.den.eval_complex(z);
        if d.norm() < self.pole_threshold(z) {
            return Err(AlgebraError::PoleAtPoint);
        }
        Ok(self.num.eval_complex(z) / d)
    }

    /// Exact Gaussian-rational evaluation of both polynomials at the binary
    /// value of `z`, rounded once at the end.
    fn eval_extended(&self, z: Complex64) -> Result<Complex64, AlgebraError> {
        let re = BigRational::from_float(z.re).ok_or(AlgebraError::NonFinite)?;
        let im = BigRational::from_float(z.im).ok_or(AlgebraError::NonFinite)?;
        let (dr, di) = self.den.eval_gaussian(&re, &im);
        if dr.is_zero() && di.is_zero() {
            return Err(AlgebraError::PoleAtPoint);
        }
        let (nr, ni) = self.num.eval_gaussian(&re, &im);
        // (nr + i ni)/(dr + i di)
        let norm = &dr * &dr + &di * &di;
        let qr = (&nr * &dr + &ni * &di) / &norm;
        let qi = (&ni * &dr - &nr * &di) / &norm;
        let d = Complex64::new(ratio_to_f64(&dr), ratio_to_f64(&di));
        if d.norm() < self.pole_threshold(z) * 1e-8 {
            return Err(AlgebraError::PoleAtPoint);
        }
        Ok(Complex64::new(ratio_to_f64(&qr), ratio_to_f64(&qi)))
    }

    /// Complex derivative as an exact rational function.
    pub fn derivative(&self) -> RatFun {
        let n = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        let d = &self.den * &self.den;
        RatFun::reduce(n, d)
    }
}

impl Add for &RatFun {
    type Output = RatFun;
    fn add(self, rhs: &RatFun) -> RatFun {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            return RatFun::reduce(&self.num + &rhs.num, self.den.clone());
        }
        RatFun::reduce(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl Sub for &RatFun {
    type Output = RatFun;
    fn sub(self, rhs: &RatFun) -> RatFun {
        self + &(-rhs)
    }
}

impl Neg for &RatFun {
    type Output = RatFun;
    fn neg(self) -> RatFun {
        RatFun {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Mul for &RatFun {
    type Output = RatFun;
    fn mul(self, rhs: &RatFun) -> RatFun {
        if self.is_zero() || rhs.is_zero() {
            return RatFun::zero();
        }
        // cross-cancel before multiplying to keep operands small
        let g1 = self.num.gcd(&rhs.den);
        let g2 = rhs.num.gcd(&self.den);
        let (n1, d2) = if g1.is_constant() {
            (self.num.clone(), rhs.den.clone())
        } else {
            (
                self.num.exact_div(&g1).unwrap(),
                rhs.den.exact_div(&g1).unwrap(),
            )
        };
        let (n2, d1) = if g2.is_constant() {
            (rhs.num.clone(), self.den.clone())
        } else {
            (
                rhs.num.exact_div(&g2).unwrap(),
                self.den.exact_div(&g2).unwrap(),
            )
        };
        RatFun::with_monic_den(&n1 * &n2, &d1 * &d2)
    }
}

impl Div for &RatFun {
    type Output = RatFun;
    /// Panics on division by zero; use [`RatFun::checked_div`] for the fallible form.
    fn div(self, rhs: &RatFun) -> RatFun {
        self.checked_div(rhs)
            .expect("division by the zero function")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for RatFun {
            type Output = RatFun;
            fn $m(self, rhs: RatFun) -> RatFun {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl fmt::Debug for RatFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for RatFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_constant() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}
