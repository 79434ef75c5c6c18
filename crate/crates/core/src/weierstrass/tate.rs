//! Exact degree tracking along the doubling orbit.
//!
//! For polynomial `a, b` the duplication numerator and denominator of `x`
//! can only share factors over roots of the discriminant, and degree drops
//! come from cancellation of leading terms. So it suffices to carry `x`
//! modulo `s^K` (with `s` the squarefree discriminant) and as a truncated
//! expansion at infinity, next to the exact degrees. Each step consumes some
//! of the precision; running out is detected and triggers a restart.
//!
//! Everything runs over Z: the finite side uses the variable `T = c·t` in
//! which `s` becomes a monic integer polynomial, and the model is rescaled by
//! `(x, a, b) ↦ (u^2 x, u^4 a, u^6 b)`, which changes no degree. Numerator
//! and denominator are only ever needed up to a common unit, so contents and
//! unit series are never divided out.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::exactalg::{int_mul, Poly, RatFun};

pub(super) enum LocalError {
    /// Not enough precision to certify the cancellation.
    Saturated,
    Budget {
        degree: usize,
        cap: usize,
    },
}

type IPoly = Vec<BigInt>;

fn trim(mut p: IPoly) -> IPoly {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

fn iadd(a: &[BigInt], b: &[BigInt]) -> IPoly {
    let n = a.len().max(b.len());
    let mut out = vec![BigInt::zero(); n];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] += c;
    }
    trim(out)
}

fn iscale(a: &[BigInt], c: i64) -> IPoly {
    let c = BigInt::from(c);
    trim(a.iter().map(|x| x * &c).collect())
}

fn ishift(a: &[BigInt], k: usize) -> IPoly {
    if a.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigInt::zero(); k];
    out.extend_from_slice(a);
    out
}

fn itrunc(a: &[BigInt], j: usize) -> IPoly {
    trim(a.iter().take(j).cloned().collect())
}

/// Division by a monic integer polynomial; returns `(quotient, remainder)`.
fn idivrem_monic(a: &[BigInt], m: &[BigInt]) -> (IPoly, IPoly) {
    let dm = m.len() - 1;
    if a.len() <= dm {
        return (Vec::new(), a.to_vec());
    }
    let mut r = a.to_vec();
    let mut q = vec![BigInt::zero(); a.len() - dm];
    for k in (0..q.len()).rev() {
        let c = std::mem::take(&mut r[k + dm]);
        if c.is_zero() {
            continue;
        }
        for (j, mc) in m[..dm].iter().enumerate() {
            r[k + j] -= &c * mc;
        }
        q[k] = c;
    }
    r.truncate(dm);
    (trim(q), trim(r))
}

fn irem(a: &[BigInt], m: &[BigInt]) -> IPoly {
    idivrem_monic(a, m).1
}

fn mulmod(a: &[BigInt], b: &[BigInt], m: &[BigInt]) -> IPoly {
    irem(&trim(int_mul(a, b)), m)
}

fn multrunc(a: &[BigInt], b: &[BigInt], j: usize) -> IPoly {
    itrunc(&int_mul(&itrunc(a, j), &itrunc(b, j)), j)
}

fn ipow(a: &[BigInt], e: usize) -> IPoly {
    let mut acc: IPoly = vec![BigInt::one()];
    for _ in 0..e {
        acc = trim(int_mul(&acc, a));
    }
    acc
}

/// Divides a pair by the gcd of all its coefficients.
fn normalise_pair(p: &mut IPoly, q: &mut IPoly) {
    let g = p
        .iter()
        .chain(q.iter())
        .fold(BigInt::zero(), |acc, c| acc.gcd(c));
    if g.is_zero() || g.is_one() {
        return;
    }
    for c in p.iter_mut().chain(q.iter_mut()) {
        *c = &*c / &g;
    }
}

fn to_poly(p: &[BigInt]) -> Poly {
    Poly::from_integers(p.to_vec())
}

fn valuation(p: &[BigInt]) -> Option<usize> {
    p.iter().position(|c| !c.is_zero())
}

/// `p(t/c)` for a rational polynomial, exactly.
fn substitute_scaled(p: &Poly, c: &BigRational) -> Poly {
    let inv = c.recip();
    let mut pw = BigRational::one();
    let mut out = Vec::with_capacity(p.coeffs().len());
    for coef in p.coeffs() {
        out.push(coef * &pw);
        pw *= &inv;
    }
    Poly::from_coeffs(out)
}

fn lcm_den(polys: &[&Poly]) -> BigInt {
    polys
        .iter()
        .flat_map(|p| p.coeffs().iter())
        .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
}

fn integer_coeffs(p: &Poly) -> IPoly {
    trim(p.coeffs().iter().map(|c| c.to_integer()).collect())
}

/// Integer model `(u^4 a, u^6 b)` of a rational model.
fn integral_model(a: &Poly, b: &Poly) -> (BigInt, IPoly, IPoly) {
    let u = BigRational::from_integer(lcm_den(&[a, b]));
    let ai = a.scale(&u.pow(4));
    let bi = b.scale(&u.pow(6));
    (u.to_integer(), integer_coeffs(&ai), integer_coeffs(&bi))
}

/// `(N, D)` over Z with `u^2 · x = N/D` up to a common factor.
fn integral_pair(num: &Poly, den: &Poly, u: &BigInt) -> (IPoly, IPoly) {
    let n = num.scale(&BigRational::from_integer(u * u));
    let l = BigRational::from_integer(lcm_den(&[&n, den]));
    let (mut a, mut b) = (integer_coeffs(&n.scale(&l)), integer_coeffs(&den.scale(&l)));
    normalise_pair(&mut a, &mut b);
    (a, b)
}

/// The duplication numerator `N^4 - 2aN^2D^2 - 8bND^3 + a^2D^4` and
/// denominator `4D(N^3 + aND^2 + bD^3)` through a given product.
fn duplication_forms(
    n: &[BigInt],
    d: &[BigInt],
    a: &[BigInt],
    b: &[BigInt],
    mul: &dyn Fn(&[BigInt], &[BigInt]) -> IPoly,
) -> (IPoly, IPoly) {
    let n2 = mul(n, n);
    let d2 = mul(d, d);
    let nd = mul(n, d);
    let mut q4 = mul(&n2, &n2);
    let mut cub = mul(&n2, n);
    if !a.is_empty() {
        q4 = iadd(&q4, &iscale(&mul(&mul(a, &n2), &d2), -2));
        q4 = iadd(&q4, &mul(&mul(a, a), &mul(&d2, &d2)));
        cub = iadd(&cub, &mul(&mul(a, &nd), d));
    }
    if !b.is_empty() {
        q4 = iadd(&q4, &iscale(&mul(&mul(b, &nd), &d2), -8));
        cub = iadd(&cub, &mul(&mul(b, &d2), d));
    }
    let c = iscale(&mul(&cub, d), 4);
    (q4, c)
}

pub(super) struct LocalOrbit {
    /// finite side, in the variable `T = c t`
    s: IPoly,
    c: BigRational,
    fa: IPoly,
    fb: IPoly,
    fu: BigInt,
    /// infinity side: reversed integer model with degrees
    ia: Option<(usize, IPoly)>,
    ib: Option<(usize, IPoly)>,
    iu: BigInt,
}

struct State {
    dn: usize,
    dd: usize,
    fin: (IPoly, IPoly),
    k: usize,
    inf: (IPoly, IPoly),
    j: usize,
}

impl LocalOrbit {
    pub(super) fn new(a: &Poly, b: &Poly, s: &Poly) -> Self {
        let sm = s.monic();
        let c = BigRational::from_integer(lcm_den(&[&sm]));
        // c^{deg s} s(T/c) is monic with integer coefficients
        let ds = sm.degree_or_zero() as i32;
        let s_int = integer_coeffs(&substitute_scaled(&sm, &c).scale(&c.pow(ds)));
        let (fu, fa, fb) = integral_model(&substitute_scaled(a, &c), &substitute_scaled(b, &c));
        let (iu, ia, ib) = integral_model(a, b);
        let rev = |p: &IPoly| {
            if p.is_empty() {
                None
            } else {
                let mut r = p.clone();
                r.reverse();
                Some((p.len() - 1, r))
            }
        };
        LocalOrbit {
            s: s_int,
            c,
            fa,
            fb,
            fu,
            ia: rev(&ia),
            ib: rev(&ib),
            iu,
        }
    }

    /// Degrees of `x(2^i P)` for `i = 1..=steps`, starting from `x`.
    pub(super) fn degrees(
        &self,
        x: &RatFun,
        steps: usize,
        cap: usize,
    ) -> Result<Vec<usize>, LocalError> {
        let mut prec = 4 * (steps + 2);
        loop {
            match self.run(x, steps, cap, prec) {
                Err(LocalError::Saturated) if prec < 1024 => prec *= 2,
                other => return other,
            }
        }
    }

    fn run(
        &self,
        x: &RatFun,
        steps: usize,
        cap: usize,
        prec: usize,
    ) -> Result<Vec<usize>, LocalError> {
        let dn = x.num().degree().ok_or(LocalError::Saturated)?;
        let dd = x.den().degree_or_zero();
        let m = ipow(&self.s, prec);
        let (fnum, fden) = integral_pair(
            &substitute_scaled(x.num(), &self.c),
            &substitute_scaled(x.den(), &self.c),
            &self.fu,
        );
        let (inum, iden) = integral_pair(x.num(), x.den(), &self.iu);
        let rev = |p: &IPoly, d: usize| {
            let mut r = p.clone();
            r.resize(d + 1, BigInt::zero());
            r.reverse();
            itrunc(&r, prec)
        };
        let mut st = State {
            dn,
            dd,
            fin: (irem(&fnum, &m), irem(&fden, &m)),
            k: prec,
            inf: (rev(&inum, dn), rev(&iden, dd)),
            j: prec,
        };
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            st = self.step(st, cap)?;
            out.push(st.dn.max(st.dd));
        }
        Ok(out)
    }

    fn step(&self, st: State, cap: usize) -> Result<State, LocalError> {
        // finite places
        let m = ipow(&self.s, st.k);
        let (n, d) = &st.fin;
        let (mut q4, mut c) = duplication_forms(n, d, &self.fa, &self.fb, &|x, y| mulmod(x, y, &m));
        // peel common factors one layer of `s` at a time
        let mut dh = 0;
        let mut e = 0;
        loop {
            let g = to_poly(&self.s)
                .gcd(&to_poly(&irem(&q4, &self.s)))
                .gcd(&to_poly(&irem(&c, &self.s)));
            if g.is_constant() {
                break;
            }
            e += 1;
            if e + 1 >= st.k {
                return Err(LocalError::Saturated);
            }
            // a monic divisor of a monic integer polynomial is integral
            let gi = integer_coeffs(&g);
            let (qq, rq) = idivrem_monic(&q4, &gi);
            let (qc, rc) = idivrem_monic(&c, &gi);
            if !rq.is_empty() || !rc.is_empty() {
                return Err(LocalError::Saturated);
            }
            q4 = qq;
            c = qc;
            dh += gi.len() - 1;
        }
        let k = st.k - e;
        let mk = ipow(&self.s, k);
        let mut fin = (irem(&q4, &mk), irem(&c, &mk));
        normalise_pair(&mut fin.0, &mut fin.1);

        // infinity
        let j = st.j;
        let (rn, rd) = &st.inf;
        let mt = |x: &[BigInt], y: &[BigInt]| multrunc(x, y, j);
        let rn2 = mt(rn, rn);
        let rd2 = mt(rd, rd);
        let rnd = mt(rn, rd);
        let mut q_terms: Vec<(usize, IPoly)> = vec![(4 * st.dn, mt(&rn2, &rn2))];
        let mut c_terms: Vec<(usize, IPoly)> = vec![(3 * st.dn + st.dd, mt(&rn2, &rnd))];
        if let Some((da, ra)) = &self.ia {
            q_terms.push((
                da + 2 * st.dn + 2 * st.dd,
                iscale(&mt(&mt(ra, &rn2), &rd2), -2),
            ));
            q_terms.push((2 * da + 4 * st.dd, mt(&mt(ra, ra), &mt(&rd2, &rd2))));
            c_terms.push((da + st.dn + 3 * st.dd, mt(&mt(ra, &rnd), &rd2)));
        }
        if let Some((db, rb)) = &self.ib {
            q_terms.push((db + st.dn + 3 * st.dd, iscale(&mt(&mt(rb, &rnd), &rd2), -8)));
            c_terms.push((db + 4 * st.dd, mt(&mt(rb, &rd2), &rd2)));
        }
        let combine = |terms: &[(usize, IPoly)]| -> (usize, IPoly) {
            let top = terms.iter().map(|t| t.0).max().unwrap();
            let mut acc = Vec::new();
            for (nom, p) in terms {
                acc = iadd(&acc, &ishift(p, top - nom));
            }
            (top, itrunc(&acc, j))
        };
        let (lq, sq) = combine(&q_terms);
        let (lc, sc) = combine(&c_terms);
        let oq = valuation(&sq).ok_or(LocalError::Saturated)?;
        let oc = valuation(&sc).ok_or(LocalError::Saturated)?;
        let deg_q = lq - oq;
        let deg_c = lc - oc;
        if deg_q.max(deg_c) > cap {
            return Err(LocalError::Budget {
                degree: deg_q.max(deg_c),
                cap,
            });
        }
        let lost = oq.max(oc);
        if lost >= j {
            return Err(LocalError::Saturated);
        }
        let j2 = j - lost;
        // the unit series of the common factor at infinity is kept
        let mut inf = (itrunc(&sq[oq..], j2), itrunc(&sc[oc..], j2));
        normalise_pair(&mut inf.0, &mut inf.1);
        Ok(State {
            dn: deg_q - dh,
            dd: deg_c - dh,
            fin,
            k,
            inf,
            j: j2,
        })
    }
}
