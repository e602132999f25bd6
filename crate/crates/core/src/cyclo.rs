//! Exact arithmetic in cyclotomic fields `Q(z)`, `z = exp(2*pi*i/N)`.
//!
//! Elements are stored in the power basis `1, z, ..., z^(phi(N)-1)` and kept
//! reduced modulo the cyclotomic polynomial, so equal elements have equal
//! coordinates.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CycloError {
    #[error("cyclotomic order must be positive")]
    ZeroOrder,
    #[error("inverse of zero")]
    DivisionByZero,
    #[error("mixed cyclotomic fields: Q(z_{0}) and Q(z_{1})")]
    FieldMismatch(u32, u32),
    #[error("cannot parse cyclotomic scalar {0:?}: {1}")]
    Parse(String, String),
}

/// The field `Q(z_N)` together with its minimal polynomial `Phi_N`.
#[derive(Debug, PartialEq, Eq)]
pub struct CycloField {
    order: u32,
    /// Coefficients of `Phi_N`, constant term first. Monic, integral.
    minimal_polynomial: Vec<BigRational>,
}

fn trim(p: &mut Vec<BigRational>) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

/// Exact quotient of `num` by the monic polynomial `den`. Panics if the
/// division leaves a remainder.
fn exact_div_monic(num: &[BigRational], den: &[BigRational]) -> Vec<BigRational> {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    if rem.len() <= dd {
        assert!(rem.iter().all(|c| c.is_zero()), "inexact division");
        return vec![];
    }
    let mut quot = vec![BigRational::zero(); rem.len() - dd];
    for k in (dd..rem.len()).rev() {
        let c = rem[k].clone();
        if c.is_zero() {
            continue;
        }
        quot[k - dd] = c.clone();
        for (j, dj) in den.iter().enumerate() {
            rem[k - dd + j] -= &c * dj;
        }
    }
    assert!(rem.iter().all(|c| c.is_zero()), "inexact division");
    quot
}

fn cyclotomic_polynomial(n: u32) -> Vec<BigRational> {
    // x^n - 1 divided by Phi_d for every proper divisor d.
    let mut p = vec![BigRational::zero(); n as usize + 1];
    p[0] = -BigRational::one();
    p[n as usize] = BigRational::one();
    for d in 1..n {
        if n.is_multiple_of(d) {
            p = exact_div_monic(&p, &cyclotomic_polynomial(d));
        }
    }
    p
}

impl CycloField {
    pub fn new(order: u32) -> Result<Arc<Self>, CycloError> {
        if order == 0 {
            return Err(CycloError::ZeroOrder);
        }
        Ok(Arc::new(CycloField {
            order,
            minimal_polynomial: cyclotomic_polynomial(order),
        }))
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `phi(N)`, the degree of the field over `Q`.
    pub fn degree(&self) -> usize {
        self.minimal_polynomial.len() - 1
    }

    pub fn minimal_polynomial(&self) -> &[BigRational] {
        &self.minimal_polynomial
    }

    pub fn zero(self: &Arc<Self>) -> CycloScalar {
        CycloScalar {
            field: self.clone(),
            coords: vec![BigRational::zero(); self.degree()],
        }
    }

    pub fn one(self: &Arc<Self>) -> CycloScalar {
        self.rational(BigRational::one())
    }

    pub fn from_int(self: &Arc<Self>, v: i64) -> CycloScalar {
        self.rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn rational(self: &Arc<Self>, v: BigRational) -> CycloScalar {
        let mut s = self.zero();
        s.coords[0] = v;
        s
    }

    /// `z^k` for any integer `k` (negative powers wrap modulo `N`).
    pub fn zeta_pow(self: &Arc<Self>, k: i64) -> CycloScalar {
        let e = k.rem_euclid(self.order as i64) as usize;
        let mut p = vec![BigRational::zero(); e + 1];
        p[e] = BigRational::one();
        self.from_poly(p)
    }

    /// Reduces an arbitrary polynomial in `z` into the field.
    pub fn from_poly(self: &Arc<Self>, mut p: Vec<BigRational>) -> CycloScalar {
        self.reduce(&mut p);
        p.resize(self.degree(), BigRational::zero());
        CycloScalar {
            field: self.clone(),
            coords: p,
        }
    }

    fn reduce(&self, p: &mut Vec<BigRational>) {
        let d = self.degree();
        let phi = &self.minimal_polynomial;
        while p.len() > d {
            let top = p.pop().unwrap();
            if top.is_zero() {
                continue;
            }
            let base = p.len() - d;
            for (j, pj) in phi.iter().take(d).enumerate() {
                if !pj.is_zero() {
                    p[base + j] -= &top * pj;
                }
            }
        }
    }

    /// Parses the textual form produced by [`CycloScalar`]'s `Display`.
    pub fn parse_scalar(self: &Arc<Self>, text: &str) -> Result<CycloScalar, CycloError> {
        let err = |m: &str| CycloError::Parse(text.to_string(), m.to_string());
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(err("empty"));
        }
        let mut acc: Vec<BigRational> = Vec::new();
        let bytes = s.as_bytes();
        let mut i = 0;
        let mut first = true;
        while i < bytes.len() {
            let mut sign = BigRational::one();
            match bytes[i] {
                b'+' => i += 1,
                b'-' => {
                    sign = -sign;
                    i += 1
                }
                _ if first => {}
                _ => return Err(err("expected '+' or '-'")),
            }
            first = false;
            let start = i;
            while i < bytes.len() && bytes[i] != b'+' && bytes[i] != b'-' {
                i += 1;
            }
            let term = &s[start..i];
            if term.is_empty() {
                return Err(err("empty term"));
            }
            let (coef, power) = parse_cyclo_term(term).map_err(|m| err(&m))?;
            if power >= acc.len() {
                acc.resize(power + 1, BigRational::zero());
            }
            acc[power] += sign * coef;
        }
        Ok(self.from_poly(acc))
    }
}

fn parse_rational(s: &str) -> Result<BigRational, String> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let ok = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    if !ok(n) || !ok(d) {
        return Err(format!("bad rational {s:?}"));
    }
    let n = BigInt::from_str(n).map_err(|e| e.to_string())?;
    let d = BigInt::from_str(d).map_err(|e| e.to_string())?;
    if d.is_zero() {
        return Err("zero denominator".into());
    }
    Ok(BigRational::new(n, d))
}

fn parse_power(s: &str) -> Result<usize, String> {
    if s == "z" {
        return Ok(1);
    }
    match s.strip_prefix("z^") {
        Some(e) if !e.is_empty() && e.len() < 7 && e.bytes().all(|b| b.is_ascii_digit()) => {
            e.parse().map_err(|_| format!("bad exponent {e:?}"))
        }
        _ => Err(format!("bad power {s:?}")),
    }
}

fn parse_cyclo_term(term: &str) -> Result<(BigRational, usize), String> {
    if term.starts_with('z') {
        return Ok((BigRational::one(), parse_power(term)?));
    }
    match term.split_once('*') {
        Some((c, p)) => Ok((parse_rational(c)?, parse_power(p)?)),
        None => Ok((parse_rational(term)?, 0)),
    }
}

/// An element of `Q(z_N)`.
#[derive(Clone)]
pub struct CycloScalar {
    field: Arc<CycloField>,
    coords: Vec<BigRational>,
}

impl PartialEq for CycloScalar {
    fn eq(&self, other: &Self) -> bool {
        self.field.order == other.field.order && self.coords == other.coords
    }
}

impl Eq for CycloScalar {}

impl fmt::Debug for CycloScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CycloScalar[N={}]({})", self.field.order, self)
    }
}

impl CycloScalar {
    pub fn field(&self) -> &Arc<CycloField> {
        &self.field
    }

    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.coords[0].is_one() && self.coords[1..].iter().all(|c| c.is_zero())
    }

    /// The value as a rational number, if it lies in `Q`.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.coords[1..].iter().all(|c| c.is_zero()) {
            Some(&self.coords[0])
        } else {
            None
        }
    }

    fn is_rational(&self) -> bool {
        self.coords[1..].iter().all(|c| c.is_zero())
    }

    fn check(&self, other: &Self) -> Result<(), CycloError> {
        if self.field.order != other.field.order {
            Err(CycloError::FieldMismatch(
                self.field.order,
                other.field.order,
            ))
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, CycloError> {
        self.check(other)?;
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a + b)
            .collect();
        Ok(CycloScalar {
            field: self.field.clone(),
            coords,
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, CycloError> {
        self.check(other)?;
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a - b)
            .collect();
        Ok(CycloScalar {
            field: self.field.clone(),
            coords,
        })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, CycloError> {
        self.check(other)?;
        if other.is_rational() {
            return Ok(self.scale(&other.coords[0]));
        }
        if self.is_rational() {
            return Ok(other.scale(&self.coords[0]));
        }
        let d = self.coords.len();
        let mut prod = vec![BigRational::zero(); 2 * d - 1];
        for (i, a) in self.coords.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coords.iter().enumerate() {
                if !b.is_zero() {
                    prod[i + j] += a * b;
                }
            }
        }
        Ok(self.field.from_poly(prod))
    }

    /// Multiplies by a rational number.
    pub fn scale(&self, r: &BigRational) -> Self {
        CycloScalar {
            field: self.field.clone(),
            coords: self.coords.iter().map(|c| c * r).collect(),
        }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm against
    /// the minimal polynomial.
    pub fn inv(&self) -> Result<Self, CycloError> {
        if self.is_zero() {
            return Err(CycloError::DivisionByZero);
        }
        if self.is_rational() {
            return Ok(self.field.rational(self.coords[0].recip()));
        }
        // Invariant: s * a == r  (mod Phi)
        let mut r0 = self.field.minimal_polynomial.clone();
        let mut r1 = self.coords.clone();
        trim(&mut r1);
        let mut s0: Vec<BigRational> = vec![];
        let mut s1: Vec<BigRational> = vec![BigRational::one()];
        while r1.len() > 1 {
            let (q, r) = poly_divmod(&r0, &r1);
            let qs = poly_mul(&q, &s1);
            let s2 = poly_sub(&s0, &qs);
            r0 = std::mem::replace(&mut r1, r);
            s0 = std::mem::replace(&mut s1, s2);
        }
        // r1 is a nonzero constant because Phi is irreducible.
        let c = r1[0].recip();
        let inv: Vec<BigRational> = s1.iter().map(|x| x * &c).collect();
        Ok(self.field.from_poly(inv))
    }

    /// Complex conjugation, `z^k -> z^(N-k)`.
    pub fn conj(&self) -> Self {
        if self.is_rational() {
            return self.clone();
        }
        let n = self.field.order as usize;
        let mut p = vec![BigRational::zero(); n];
        for (k, c) in self.coords.iter().enumerate() {
            if !c.is_zero() {
                p[(n - k) % n] += c;
            }
        }
        self.field.from_poly(p)
    }

    /// `conj(a) * a`; equals one exactly when `|a| = 1`.
    pub fn norm_squared(&self) -> Self {
        &self.conj() * self
    }

    /// Numerical embedding with `z -> exp(2*pi*i/N)`.
    pub fn to_complex(&self) -> (f64, f64) {
        let n = self.field.order as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, c) in self.coords.iter().enumerate() {
            let v = rational_to_f64(c);
            let t = 2.0 * std::f64::consts::PI * k as f64 / n;
            re += v * t.cos();
            im += v * t.sin();
        }
        (re, im)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        // Very large numerator/denominator: scale down first.
        let n = r.numer().bits() as i64;
        let d = r.denom().bits() as i64;
        let shift = (n.max(d) - 1000).max(0) as usize;
        let nn = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let dd = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        nn / dd
    })
}

fn poly_divmod(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut r = a.to_vec();
    trim(&mut r);
    let db = b.len() - 1;
    let lead = b[db].clone();
    if r.len() <= db {
        return (vec![], r);
    }
    let mut q = vec![BigRational::zero(); r.len() - db];
    for k in (db..r.len()).rev() {
        if r[k].is_zero() {
            continue;
        }
        let c = &r[k] / &lead;
        for (j, bj) in b.iter().enumerate() {
            r[k - db + j] -= &c * bj;
        }
        q[k - db] = c;
    }
    trim(&mut r);
    (q, r)
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(&mut out);
    out
}

fn poly_sub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let n = a.len().max(b.len());
    let mut out = vec![BigRational::zero(); n];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] -= y;
    }
    trim(&mut out);
    out
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $checked:ident) => {
        impl $tr<&CycloScalar> for &CycloScalar {
            type Output = CycloScalar;
            /// Panics when the operands live in different fields.
            fn $m(self, rhs: &CycloScalar) -> CycloScalar {
                self.$checked(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<CycloScalar> for CycloScalar {
            type Output = CycloScalar;
            fn $m(self, rhs: CycloScalar) -> CycloScalar {
                (&self).$m(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Sub, sub, checked_sub);
forward_binop!(Mul, mul, checked_mul);

impl Neg for &CycloScalar {
    type Output = CycloScalar;
    fn neg(self) -> CycloScalar {
        CycloScalar {
            field: self.field.clone(),
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for CycloScalar {
    type Output = CycloScalar;
    fn neg(self) -> CycloScalar {
        -&self
    }
}

pub(crate) fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for CycloScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coords.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", fmt_rational(&mag))?,
                _ => {
                    if !mag.is_one() {
                        write!(f, "{}*", fmt_rational(&mag))?;
                    }
                    if k == 1 {
                        write!(f, "z")?;
                    } else {
                        write!(f, "z^{k}")?;
                    }
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Least common multiple helper used when sizing a field for a game.
pub fn lcm_order(values: &[u32]) -> u32 {
    values.iter().fold(1u32, |acc, &v| acc.lcm(&v.max(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn trivial_field_is_rationals() {
        let f = CycloField::new(1).unwrap();
        assert_eq!(f.degree(), 1);
        assert_eq!(f.minimal_polynomial(), &[q(-1), q(1)]);
        assert!(f.zeta_pow(1).is_one());
    }

    #[test]
    fn gaussian_rationals() {
        let f = CycloField::new(4).unwrap();
        assert_eq!(f.minimal_polynomial(), &[q(1), q(0), q(1)]);
        let i = f.zeta_pow(1);
        assert_eq!(&i * &i, -f.one());
        assert_eq!(i.inv().unwrap(), -&i);
    }

    #[test]
    fn phi6_coefficients() {
        // (x^6 - 1) / ((x - 1)(x + 1)(x^2 + x + 1)) = x^2 - x + 1
        let f = CycloField::new(6).unwrap();
        assert_eq!(f.minimal_polynomial(), &[q(1), q(-1), q(1)]);
    }

    #[test]
    fn cube_root_of_unity() {
        let f = CycloField::new(3).unwrap();
        let z = f.zeta_pow(1);
        assert!((&(&z * &z) * &z).is_one());
    }

    #[test]
    fn eighth_roots_sum_squared() {
        // (z + z^7)^2 = (2 cos(pi/4))^2 = 2
        let f = CycloField::new(8).unwrap();
        let s = &f.zeta_pow(1) + &f.zeta_pow(7);
        let (re, im) = s.to_complex();
        assert!(((re * re - im * im) - 2.0).abs() < 1e-12);
        assert_eq!(&s * &s, f.from_int(2));
    }

    #[test]
    fn norms() {
        let f8 = CycloField::new(8).unwrap();
        assert!(f8.zeta_pow(1).norm_squared().is_one());
        assert_eq!(f8.from_int(2).norm_squared(), f8.from_int(4));
        let f4 = CycloField::new(4).unwrap();
        let a = &f4.one() + &f4.zeta_pow(1);
        assert_eq!(a.norm_squared(), f4.from_int(2));
    }

    #[test]
    fn inverse_of_zero_is_error() {
        let f = CycloField::new(5).unwrap();
        assert_eq!(f.zero().inv(), Err(CycloError::DivisionByZero));
    }

    #[test]
    fn mixed_fields_rejected() {
        let a = CycloField::new(3).unwrap().one();
        let b = CycloField::new(4).unwrap().one();
        assert_eq!(a.checked_mul(&b), Err(CycloError::FieldMismatch(3, 4)));
    }

    #[test]
    fn minimal_polynomial_vanishes_at_zeta() {
        for n in 1..=30u32 {
            let f = CycloField::new(n).unwrap();
            let z = f.zeta_pow(1);
            let mut acc = f.zero();
            let mut pw = f.one();
            for c in f.minimal_polynomial() {
                acc = &acc + &pw.scale(c);
                pw = &pw * &z;
            }
            assert!(acc.is_zero(), "Phi_{n}(z) != 0");
        }
    }

    #[test]
    fn display_and_parse() {
        let f = CycloField::new(12).unwrap();
        let a = f.parse_scalar("1/2 - 3*z + z^3").unwrap();
        assert_eq!(a.to_string(), "1/2 - 3*z + z^3");
        assert_eq!(f.parse_scalar(&a.to_string()).unwrap(), a);
        assert_eq!(f.parse_scalar("-z").unwrap(), -f.zeta_pow(1));
        // z^4 = z^2 - 1 in Q(z_12)
        assert_eq!(f.parse_scalar("z^4").unwrap(), f.zeta_pow(4));
        assert!(f.parse_scalar("1 + ").is_err());
        assert!(f.parse_scalar("2*y").is_err());
        assert!(f.parse_scalar("1/0").is_err());
    }
}
