//! Holomorphic maps from a disc into products of projective lines, given as
//! expression trees, with Fubini–Study pullback densities and their
//! integrals over discs.
//!
//! Densities are taken against `i dz∧dz̄ = 2 dx dy`.

use std::f64::consts::PI;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::betti_heights::{HeightReport, Level, QuadOptions};
use crate::numeric::{compensated_sum, gauss_legendre};
use crate::periods::Disc;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormsError {
    #[error("pole at z = {z}")]
    PoleAtPoint { z: Complex64 },
    #[error("{pointer}: {message}")]
    Parse { pointer: String, message: String },
    #[error("denominator vanishes identically")]
    DegenerateDivision,
    #[error("expression still contains the family parameter n")]
    UnboundParameter,
    #[error("quadrature did not settle after {levels} levels (last change {delta:e})")]
    QuadratureStalled { levels: usize, delta: f64 },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

/// Integer exponent `k·n + c`, `n` being the family parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Exponent {
    pub n_coeff: i32,
    pub constant: i32,
}

impl Exponent {
    pub fn fixed(c: i32) -> Self {
        Exponent {
            n_coeff: 0,
            constant: c,
        }
    }

    fn at(self, n: i64) -> i32 {
        (self.n_coeff as i64 * n + self.constant as i64) as i32
    }

    fn parse(s: &str) -> Option<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Ok(c) = s.parse::<i32>() {
            return Some(Exponent::fixed(c));
        }
        let pos = s.find('n')?;
        let (head, tail) = (&s[..pos], &s[pos + 1..]);
        let n_coeff = match head {
            "" | "+" => 1,
            "-" => -1,
            h => h.parse().ok()?,
        };
        let constant = if tail.is_empty() {
            0
        } else {
            tail.parse().ok()?
        };
        Some(Exponent { n_coeff, constant })
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.n_coeff, self.constant) {
            (0, c) => write!(f, "{c}"),
            (k, 0) => write!(f, "{}n", coeff_prefix(k)),
            (k, c) => write!(f, "{}n{:+}", coeff_prefix(k), c),
        }
    }
}

fn coeff_prefix(k: i32) -> String {
    match k {
        1 => String::new(),
        -1 => "-".into(),
        k => k.to_string(),
    }
}

/// Expression tree in one complex variable `z`; `Param` is the integer
/// parameter of a family, removed by [`HolExpr::instantiate`].
#[derive(Debug, Clone, PartialEq)]
pub enum HolExpr {
    Const(BigRational),
    Var,
    Param,
    Add(Box<HolExpr>, Box<HolExpr>),
    Sub(Box<HolExpr>, Box<HolExpr>),
    Mul(Box<HolExpr>, Box<HolExpr>),
    Div(Box<HolExpr>, Box<HolExpr>),
    Pow(Box<HolExpr>, Exponent),
}

use HolExpr::*;

impl HolExpr {
    pub fn constant(c: BigRational) -> Self {
        Const(c)
    }

    pub fn int(c: i64) -> Self {
        Const(BigRational::from_integer(c.into()))
    }

    pub fn var() -> Self {
        Var
    }

    fn as_const(&self) -> Option<&BigRational> {
        match self {
            Const(c) => Some(c),
            _ => None,
        }
    }

    fn is_const(&self, v: i64) -> bool {
        self.as_const()
            .is_some_and(|c| *c == BigRational::from_integer(v.into()))
    }

    pub fn add(a: HolExpr, b: HolExpr) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Const(x + y),
            _ if a.is_const(0) => b,
            _ if b.is_const(0) => a,
            _ => Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: HolExpr, b: HolExpr) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Const(x - y),
            _ if b.is_const(0) => a,
            _ => Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: HolExpr, b: HolExpr) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Const(x * y),
            _ if a.is_const(0) || b.is_const(0) => HolExpr::int(0),
            _ if a.is_const(1) => b,
            _ if b.is_const(1) => a,
            _ => Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: HolExpr, b: HolExpr) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if !y.is_zero() => Const(x / y),
            _ if b.is_const(1) => a,
            _ if a.is_const(0) && !b.is_const(0) => HolExpr::int(0),
            _ => Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: HolExpr, e: Exponent) -> Self {
        if e.n_coeff == 0 {
            match e.constant {
                0 => return HolExpr::int(1),
                1 => return a,
                _ => {}
            }
            if let Some(c) = a.as_const() {
                if !c.is_zero() || e.constant > 0 {
                    let p = num_traits::pow(c.clone(), e.constant.unsigned_abs() as usize);
                    return Const(if e.constant < 0 { p.recip() } else { p });
                }
            }
        }
        Pow(Box::new(a), e)
    }

    pub fn powi(a: HolExpr, e: i32) -> Self {
        HolExpr::pow(a, Exponent::fixed(e))
    }

    /// Substitutes the family parameter and re-simplifies.
    pub fn instantiate(&self, n: i64) -> HolExpr {
        match self {
            Const(c) => Const(c.clone()),
            Var => Var,
            Param => HolExpr::int(n),
            Add(a, b) => HolExpr::add(a.instantiate(n), b.instantiate(n)),
            Sub(a, b) => HolExpr::sub(a.instantiate(n), b.instantiate(n)),
            Mul(a, b) => HolExpr::mul(a.instantiate(n), b.instantiate(n)),
            Div(a, b) => HolExpr::div(a.instantiate(n), b.instantiate(n)),
            Pow(a, e) => HolExpr::pow(a.instantiate(n), Exponent::fixed(e.at(n))),
        }
    }

    pub fn has_param(&self) -> bool {
        match self {
            Param => true,
            Pow(a, e) => e.n_coeff != 0 || a.has_param(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => a.has_param() || b.has_param(),
            Const(_) | Var => false,
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, FormsError> {
        let pole = || FormsError::PoleAtPoint { z };
        Ok(match self {
            Const(c) => Complex64::new(c.to_f64().unwrap_or(f64::NAN), 0.0),
            Var => z,
            Param => return Err(FormsError::UnboundParameter),
            Add(a, b) => a.eval(z)? + b.eval(z)?,
            Sub(a, b) => a.eval(z)? - b.eval(z)?,
            Mul(a, b) => a.eval(z)? * b.eval(z)?,
            Div(a, b) => {
                let d = b.eval(z)?;
                if d.norm() == 0.0 {
                    return Err(pole());
                }
                a.eval(z)? / d
            }
            Pow(a, e) => {
                if e.n_coeff != 0 {
                    return Err(FormsError::UnboundParameter);
                }
                let v = a.eval(z)?;
                if e.constant < 0 && v.norm() == 0.0 {
                    return Err(pole());
                }
                v.powi(e.constant)
            }
        })
    }

    /// Rejects divisions by expressions that vanish at three generic points.
    pub fn validate(&self) -> Result<(), FormsError> {
        match self {
            Div(a, b) => {
                a.validate()?;
                b.validate()?;
                let probes = [
                    Complex64::new(0.373, 0.219),
                    Complex64::new(-1.411, 0.587),
                    Complex64::new(2.03, -1.77),
                ];
                let vanishes = |e: &HolExpr| {
                    probes
                        .iter()
                        .all(|&z| e.eval(z).is_ok_and(|v| v.norm() == 0.0))
                };
                if vanishes(&b.instantiate(2)) && vanishes(&b.instantiate(3)) {
                    return Err(FormsError::DegenerateDivision);
                }
                Ok(())
            }
            Add(a, b) | Sub(a, b) | Mul(a, b) => {
                a.validate()?;
                b.validate()
            }
            Pow(a, _) => a.validate(),
            Const(_) | Var | Param => Ok(()),
        }
    }

    pub fn to_json(&self) -> Value {
        let bin = |op: &str, a: &HolExpr, b: &HolExpr| json!({"op": op, "args": [a.to_json(), b.to_json()]});
        match self {
            Const(c) => json!({"op": "const", "args": [c.to_string()]}),
            Var => json!({"op": "var", "args": []}),
            Param => json!({"op": "param", "args": []}),
            Add(a, b) => bin("add", a, b),
            Sub(a, b) => bin("sub", a, b),
            Mul(a, b) => bin("mul", a, b),
            Div(a, b) => bin("div", a, b),
            Pow(a, e) => {
                let exp = if e.n_coeff == 0 {
                    json!(e.constant)
                } else {
                    json!(e.to_string())
                };
                json!({"op": "pow", "args": [a.to_json(), exp]})
            }
        }
    }

    /// Parses `{"op": ..., "args": [...]}`; errors carry JSON pointers
    /// relative to `pointer`.
    pub fn from_json_at(v: &Value, pointer: &str) -> Result<HolExpr, FormsError> {
        let err = |p: String, m: &str| FormsError::Parse {
            pointer: p,
            message: m.to_string(),
        };
        let obj = v
            .as_object()
            .ok_or_else(|| err(pointer.to_string(), "expected an object"))?;
        let op = obj
            .get("op")
            .and_then(Value::as_str)
            .ok_or_else(|| err(format!("{pointer}/op"), "missing or non-string \"op\""))?;
        let empty = Vec::new();
        let args = match obj.get("args") {
            Some(Value::Array(a)) => a,
            None => &empty,
            Some(_) => return Err(err(format!("{pointer}/args"), "\"args\" must be an array")),
        };
        let arity = |k: usize| {
            if args.len() == k {
                Ok(())
            } else {
                Err(err(
                    format!("{pointer}/args"),
                    &format!("\"{op}\" takes {k} arguments"),
                ))
            }
        };
        let sub = |i: usize| HolExpr::from_json_at(&args[i], &format!("{pointer}/args/{i}"));
        let e = match op {
            "const" => {
                arity(1)?;
                Const(parse_rational(&args[0]).ok_or_else(|| {
                    err(
                        format!("{pointer}/args/0"),
                        "expected a rational such as \"3/4\"",
                    )
                })?)
            }
            "var" => {
                arity(0)?;
                Var
            }
            "param" => {
                arity(0)?;
                Param
            }
            "add" | "sub" | "mul" | "div" => {
                arity(2)?;
                let (a, b) = (Box::new(sub(0)?), Box::new(sub(1)?));
                match op {
                    "add" => Add(a, b),
                    "sub" => Sub(a, b),
                    "mul" => Mul(a, b),
                    _ => Div(a, b),
                }
            }
            "pow" => {
                arity(2)?;
                let e = match &args[1] {
                    Value::Number(n) => n
                        .as_i64()
                        .and_then(|k| i32::try_from(k).ok())
                        .map(Exponent::fixed),
                    Value::String(s) => Exponent::parse(s),
                    _ => None,
                }
                .ok_or_else(|| {
                    err(
                        format!("{pointer}/args/1"),
                        "expected an integer or \"k*n+c\" exponent",
                    )
                })?;
                Pow(Box::new(sub(0)?), e)
            }
            other => {
                return Err(err(
                    format!("{pointer}/op"),
                    &format!("unknown op \"{other}\""),
                ))
            }
        };
        Ok(e)
    }

    pub fn from_json(v: &Value) -> Result<HolExpr, FormsError> {
        HolExpr::from_json_at(v, "")
    }
}

fn parse_rational(v: &Value) -> Option<BigRational> {
    match v {
        Value::String(s) => {
            let s = s.trim();
            match s.split_once('/') {
                Some((p, q)) => {
                    let q: BigInt = q.trim().parse().ok()?;
                    let p: BigInt = p.trim().parse().ok()?;
                    (!q.is_zero()).then(|| BigRational::new(p, q))
                }
                None => Some(BigRational::from_integer(s.parse().ok()?)),
            }
        }
        Value::Number(n) => n.as_i64().map(|k| BigRational::from_integer(k.into())),
        _ => None,
    }
}

impl Serialize for HolExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HolExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        HolExpr::from_json(&v).map_err(serde::de::Error::custom)
    }
}

/// Symbolic derivative in `z`, simplified by constant folding.
pub fn hol_derive(e: &HolExpr) -> HolExpr {
    match e {
        Const(_) | Param => HolExpr::int(0),
        Var => HolExpr::int(1),
        Add(a, b) => HolExpr::add(hol_derive(a), hol_derive(b)),
        Sub(a, b) => HolExpr::sub(hol_derive(a), hol_derive(b)),
        Mul(a, b) => HolExpr::add(
            HolExpr::mul(hol_derive(a), (**b).clone()),
            HolExpr::mul((**a).clone(), hol_derive(b)),
        ),
        Div(a, b) => HolExpr::div(
            HolExpr::sub(
                HolExpr::mul(hol_derive(a), (**b).clone()),
                HolExpr::mul((**a).clone(), hol_derive(b)),
            ),
            HolExpr::powi((**b).clone(), 2),
        ),
        Pow(a, ex) => {
            if ex.n_coeff == 0 && ex.constant == 0 {
                return HolExpr::int(0);
            }
            let lowered = Exponent {
                n_coeff: ex.n_coeff,
                constant: ex.constant - 1,
            };
            let coeff = if ex.n_coeff == 0 {
                HolExpr::int(ex.constant as i64)
            } else {
                HolExpr::add(
                    HolExpr::mul(HolExpr::int(ex.n_coeff as i64), Param),
                    HolExpr::int(ex.constant as i64),
                )
            };
            HolExpr::mul(
                HolExpr::mul(coeff, HolExpr::pow((**a).clone(), lowered)),
                hol_derive(a),
            )
        }
    }
}

/// Map into `(P^1)^k` in affine coordinates, with a Fubini–Study weight per
/// factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMap {
    components: Vec<HolExpr>,
    weights: Vec<f64>,
    derivatives: Vec<HolExpr>,
}

#[derive(Serialize, Deserialize)]
struct ProductMapRepr {
    components: Vec<HolExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl Serialize for ProductMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let weights = self
            .weights
            .iter()
            .any(|w| *w != 1.0)
            .then(|| self.weights.clone());
        ProductMapRepr {
            components: self.components.clone(),
            weights,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProductMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = ProductMapRepr::deserialize(d)?;
        match r.weights {
            Some(w) => ProductMap::with_weights(r.components, w),
            None => ProductMap::new(r.components),
        }
        .map_err(serde::de::Error::custom)
    }
}

impl ProductMap {
    pub fn new(components: Vec<HolExpr>) -> Result<Self, FormsError> {
        let w = vec![1.0; components.len()];
        ProductMap::with_weights(components, w)
    }

    pub fn with_weights(components: Vec<HolExpr>, weights: Vec<f64>) -> Result<Self, FormsError> {
        if weights.len() != components.len() || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(FormsError::InvalidOptions(
                "one nonnegative weight per component".into(),
            ));
        }
        for c in &components {
            c.validate()?;
        }
        let derivatives = components.iter().map(hol_derive).collect();
        Ok(ProductMap {
            components,
            weights,
            derivatives,
        })
    }

    pub fn components(&self) -> &[HolExpr] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn instantiate(&self, n: i64) -> Result<ProductMap, FormsError> {
        ProductMap::with_weights(
            self.components.iter().map(|c| c.instantiate(n)).collect(),
            self.weights.clone(),
        )
    }

    /// Affine coordinates of the image point.
    pub fn eval(&self, z: Complex64) -> Result<Vec<Complex64>, FormsError> {
        self.components.iter().map(|c| c.eval(z)).collect()
    }

    /// Precomposition with `z -> b + ρ z`.
    pub fn recentred(&self, b: Complex64, rho: f64) -> RecentredMap<'_> {
        RecentredMap {
            map: self,
            center: b,
            scale: rho,
        }
    }
}

/// `Σ_k w_k |f_k'(z)|^2 / (1 + |f_k(z)|^2)^2`, against `i dz∧dz̄`.
pub fn fs_density(m: &ProductMap, z: Complex64) -> Result<f64, FormsError> {
    let mut acc = 0.0;
    for ((f, df), w) in m.components.iter().zip(&m.derivatives).zip(&m.weights) {
        let v = f.eval(z)?;
        let d = df.eval(z)?;
        let q = 1.0 + v.norm_sqr();
        acc += w * d.norm_sqr() / (q * q);
    }
    if !acc.is_finite() {
        return Err(FormsError::PoleAtPoint { z });
    }
    Ok(acc)
}

/// A product map seen through `z -> b + ρ z`.
#[derive(Debug, Clone, Copy)]
pub struct RecentredMap<'a> {
    pub map: &'a ProductMap,
    pub center: Complex64,
    pub scale: f64,
}

/// Polar rule on a disc: Gauss–Legendre in the radius, trapezoid in angle.
pub(crate) fn polar_rule(disc: &Disc, radial: usize, angular: usize) -> Vec<(Complex64, f64)> {
    let (x, w) = gauss_legendre(radial);
    let r = disc.radius();
    let dth = 2.0 * PI / angular as f64;
    let mut out = Vec::with_capacity(radial * angular);
    for (xi, wi) in x.iter().zip(&w) {
        let rho = 0.5 * r * (xi + 1.0);
        let wr = 0.5 * r * wi * rho * dth;
        for k in 0..angular {
            out.push((
                disc.center() + Complex64::from_polar(rho, (k as f64 + 0.5) * dth),
                wr,
            ));
        }
    }
    out
}

/// `∫_D x*ω` for the product Fubini–Study form, refining a polar rule until
/// successive values differ by less than `opts.tol`.
pub fn generic_partial_height(
    m: &ProductMap,
    disc: Disc,
    opts: &QuadOptions,
) -> Result<HeightReport, FormsError> {
    if !(opts.tol > 0.0) || opts.max_levels < 2 || opts.initial_n < 2 {
        return Err(FormsError::InvalidOptions(
            "tol > 0, max_levels >= 2, initial_n >= 2".into(),
        ));
    }
    let mut levels: Vec<Level> = Vec::new();
    let mut n = opts.initial_n;
    for _ in 0..opts.max_levels {
        let rule = polar_rule(&disc, n, 2 * n);
        let mut terms = Vec::with_capacity(rule.len());
        for (z, w) in rule {
            terms.push(2.0 * w * fs_density(m, z)?);
        }
        levels.push(Level {
            n,
            value: compensated_sum(terms),
        });
        let k = levels.len();
        if k >= 2 && (levels[k - 1].value - levels[k - 2].value).abs() < opts.tol {
            return Ok(HeightReport::from_levels(levels, 0.0));
        }
        n *= 2;
    }
    let k = levels.len();
    Err(FormsError::QuadratureStalled {
        levels: k,
        delta: (levels[k - 1].value - levels[k - 2].value).abs(),
    })
}

/// Coefficient schedule of the family `x_n(z) = (z, a_n z^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `a_n = n^{-n}`.
    #[serde(rename = "paper")]
    Bounded,
    /// `a_n = 1`.
    Unit,
}

impl Schedule {
    pub fn coefficient(self, n: i64) -> BigRational {
        match self {
            Schedule::Bounded => {
                let nn = num_traits::pow(BigInt::from(n), n as usize);
                BigRational::new(BigInt::one(), nn)
            }
            Schedule::Unit => BigRational::one(),
        }
    }
}

/// `(z, a z^n)`.
pub fn example_map(n: i64, a: BigRational) -> ProductMap {
    let second = HolExpr::mul(
        HolExpr::constant(a),
        HolExpr::powi(HolExpr::var(), n as i32),
    );
    ProductMap::new(vec![HolExpr::var(), second]).expect("polynomial components")
}

/// `(z, a_n z^n)` as a template in `n`.
pub fn example_family(schedule: Schedule) -> ProductMap {
    let zn = HolExpr::pow(
        HolExpr::var(),
        Exponent {
            n_coeff: 1,
            constant: 0,
        },
    );
    let second = match schedule {
        Schedule::Bounded => HolExpr::mul(
            HolExpr::pow(
                Param,
                Exponent {
                    n_coeff: -1,
                    constant: 0,
                },
            ),
            zn,
        ),
        Schedule::Unit => zn,
    };
    ProductMap::new(vec![HolExpr::var(), second]).expect("polynomial components")
}

/// Closed form of the partial height of `(z, a z^n)` over `|z| < r`:
/// `2π r²/(1+r²) + 2π n a² r^{2n}/(1 + a² r^{2n})`.
pub fn example_closed_form(n: i64, a: f64, r: f64) -> f64 {
    let r2 = r * r;
    let u = a * a * r.powi(2 * n as i32);
    2.0 * PI * r2 / (1.0 + r2) + 2.0 * PI * n as f64 * u / (1.0 + u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: i64,
    pub closed_form: f64,
    pub quadrature: f64,
    pub abs_err: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n,closed_form,quadrature,abs_err\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:e}\n",
            r.n, r.closed_form, r.quadrature, r.abs_err
        ));
    }
    out
}

/// Partial heights of `x_n = (z, a_n z^n)` on `|z| < r`, `n = 1..=n_max`,
/// by quadrature and by the closed form.
pub fn counterexample_sweep(
    n_max: i64,
    r: f64,
    schedule: Schedule,
) -> Result<Vec<SweepRow>, FormsError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(FormsError::InvalidOptions("r must lie in (0, 1)".into()));
    }
    if n_max < 1 || (schedule == Schedule::Unit && n_max > 12) {
        return Err(FormsError::InvalidOptions(
            "n_max must be in 1..=12 for the unit schedule".into(),
        ));
    }
    let disc = Disc::new(Complex64::new(0.0, 0.0), r).expect("positive radius");
    let opts = QuadOptions {
        tol: 1e-12,
        max_levels: 8,
        initial_n: 16,
    };
    (1..=n_max)
        .map(|n| {
            let a = schedule.coefficient(n);
            let af = a.to_f64().unwrap_or(0.0);
            let q = generic_partial_height(&example_map(n, a), disc, &opts)?.value;
            let c = example_closed_form(n, af, r);
            Ok(SweepRow {
                n,
                closed_form: c,
                quadrature: q,
                abs_err: (q - c).abs(),
            })
        })
        .collect()
}
