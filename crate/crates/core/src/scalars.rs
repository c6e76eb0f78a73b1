//! Elements of `K = k((t))` with `k = ℚ`, carried at capped relative precision.
//!
//! A nonzero scalar is stored as `t^v · u` where `u = u₀ + u₁t + …` is known
//! modulo `t^p`; `p` is its relative precision and `v + p` its absolute
//! precision. Zero comes in two flavours: the exact zero (produced by literal
//! zeros and exact cancellations of exact inputs) and a zero known only modulo
//! `t^b`. The second one compares equal to anything of valuation `≥ b`.

use std::cmp::{min, Ordering};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

pub type Rational = BigRational;

/// Relative precision used when nothing else is specified.
pub const DEFAULT_PRECISION: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("cannot certify invertibility: value is zero modulo t^{0}")]
    InexactZero(i64),
    #[error("division by exact zero")]
    DivisionByZero,
}

/// Result of a three-valued zero test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZeroTest {
    Zero,
    NonZero,
    IndistinguishableAtPrecision,
}

/// `|a| = |t|^v`. Inexact zeros only give a lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Valuation {
    Finite(i64),
    AtLeast(i64),
    Infinite,
}

impl Valuation {
    /// The valuation as a lower bound usable in comparisons.
    pub fn lower_bound(self) -> i64 {
        match self {
            Valuation::Finite(v) | Valuation::AtLeast(v) => v,
            Valuation::Infinite => i64::MAX,
        }
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Exact,
    ZeroMod(i64),
    Unit { val: i64, coeffs: Vec<Rational> },
}

#[derive(Debug, Clone)]
pub struct LaurentScalar(Repr);

pub(crate) fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

impl LaurentScalar {
    pub fn zero() -> Self {
        LaurentScalar(Repr::Exact)
    }

    /// Zero known only modulo `t^bound`.
    pub fn zero_mod(bound: i64) -> Self {
        LaurentScalar(Repr::ZeroMod(bound))
    }

    pub fn one(prec: usize) -> Self {
        Self::from_rational(Rational::one(), prec)
    }

    pub fn from_int(n: i64, prec: usize) -> Self {
        Self::from_rational(rat(n), prec)
    }

    pub fn from_rational(q: Rational, prec: usize) -> Self {
        Self::monomial(q, 0, prec)
    }

    /// `q · t^k` with relative precision `prec`.
    pub fn monomial(q: Rational, k: i64, prec: usize) -> Self {
        assert!(prec > 0, "relative precision must be positive");
        if q.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![Rational::zero(); prec];
        coeffs[0] = q;
        LaurentScalar(Repr::Unit { val: k, coeffs })
    }

    /// `t^k`.
    pub fn t_pow(k: i64, prec: usize) -> Self {
        Self::monomial(Rational::one(), k, prec)
    }

    /// Builds `t^val · Σ coeffs[i] t^i` known modulo `t^(val + coeffs.len())`,
    /// normalizing leading zeros away.
    pub fn from_coeffs(val: i64, coeffs: Vec<Rational>) -> Self {
        let abs = val + coeffs.len() as i64;
        match coeffs.iter().position(|c| !c.is_zero()) {
            None => Self::zero_mod(abs),
            Some(lead) => LaurentScalar(Repr::Unit {
                val: val + lead as i64,
                coeffs: coeffs[lead..].to_vec(),
            }),
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self.0, Repr::Exact)
    }

    pub fn zero_test(&self) -> ZeroTest {
        match self.0 {
            Repr::Exact => ZeroTest::Zero,
            Repr::ZeroMod(_) => ZeroTest::IndistinguishableAtPrecision,
            Repr::Unit { .. } => ZeroTest::NonZero,
        }
    }

    /// True for the exact zero and for inexact zeros.
    pub fn is_zero_at_precision(&self) -> bool {
        !matches!(self.0, Repr::Unit { .. })
    }

    pub fn valuation(&self) -> Valuation {
        match self.0 {
            Repr::Exact => Valuation::Infinite,
            Repr::ZeroMod(b) => Valuation::AtLeast(b),
            Repr::Unit { val, .. } => Valuation::Finite(val),
        }
    }

    /// Number of known unit digits; zero for zeros.
    pub fn relative_precision(&self) -> usize {
        match &self.0 {
            Repr::Unit { coeffs, .. } => coeffs.len(),
            _ => 0,
        }
    }

    /// Exponent `N` such that the value is known modulo `t^N`; `None` if exact zero.
    pub fn absolute_precision(&self) -> Option<i64> {
        match &self.0 {
            Repr::Exact => None,
            Repr::ZeroMod(b) => Some(*b),
            Repr::Unit { val, coeffs } => Some(val + coeffs.len() as i64),
        }
    }

    /// Unit digits `u₀, u₁, …` (empty for zeros).
    pub fn unit_coefficients(&self) -> &[Rational] {
        match &self.0 {
            Repr::Unit { coeffs, .. } => coeffs,
            _ => &[],
        }
    }

    /// Coefficient of `t^k`, or `None` when it lies beyond the known precision.
    pub fn coefficient(&self, k: i64) -> Option<Rational> {
        match &self.0 {
            Repr::Exact => Some(Rational::zero()),
            Repr::ZeroMod(b) => (k < *b).then(Rational::zero),
            Repr::Unit { val, coeffs } => {
                if k < *val {
                    Some(Rational::zero())
                } else {
                    coeffs.get((k - val) as usize).cloned()
                }
            }
        }
    }

    /// Forgets everything at or beyond `t^abs`.
    pub fn truncate_absolute(&self, abs: i64) -> Self {
        match &self.0 {
            Repr::Exact => Self::zero_mod(abs),
            Repr::ZeroMod(b) => Self::zero_mod(min(*b, abs)),
            Repr::Unit { val, coeffs } => {
                if abs <= *val {
                    Self::zero_mod(abs)
                } else {
                    let keep = min(coeffs.len() as i64, abs - val) as usize;
                    LaurentScalar(Repr::Unit {
                        val: *val,
                        coeffs: coeffs[..keep].to_vec(),
                    })
                }
            }
        }
    }

    /// Multiplication by `t^k`.
    pub fn shift(&self, k: i64) -> Self {
        match &self.0 {
            Repr::Exact => Self::zero(),
            Repr::ZeroMod(b) => Self::zero_mod(b + k),
            Repr::Unit { val, coeffs } => LaurentScalar(Repr::Unit {
                val: val + k,
                coeffs: coeffs.clone(),
            }),
        }
    }

    /// Multiplication by an exact rational; precision is unchanged.
    pub fn scale_rational(&self, q: &Rational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        match &self.0 {
            Repr::Unit { val, coeffs } => LaurentScalar(Repr::Unit {
                val: *val,
                coeffs: coeffs.iter().map(|c| c * q).collect(),
            }),
            _ => self.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale_rational(&(-Rational::one()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = match (&self.0, &other.0) {
            (Repr::Exact, _) => return other.clone(),
            (_, Repr::Exact) => return self.clone(),
            (a, b) => (a, b),
        };
        let abs = min(
            self.absolute_precision().unwrap(),
            other.absolute_precision().unwrap(),
        );
        let lo = min(low_exponent(a), low_exponent(b));
        if abs <= lo {
            return Self::zero_mod(abs);
        }
        let len = (abs - lo) as usize;
        let mut acc = vec![Rational::zero(); len];
        for r in [a, b] {
            if let Repr::Unit { val, coeffs } = r {
                let off = (val - lo) as usize;
                for (i, c) in coeffs.iter().enumerate() {
                    if off + i >= len {
                        break;
                    }
                    if !c.is_zero() {
                        acc[off + i] += c;
                    }
                }
            }
        }
        Self::from_coeffs(lo, acc)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (&self.0, &other.0) {
            (Repr::Exact, _) | (_, Repr::Exact) => Self::zero(),
            (Repr::ZeroMod(b), r) | (r, Repr::ZeroMod(b)) => Self::zero_mod(b + low_exponent(r)),
            (
                Repr::Unit {
                    val: va,
                    coeffs: ca,
                },
                Repr::Unit {
                    val: vb,
                    coeffs: cb,
                },
            ) => {
                let len = min(ca.len(), cb.len());
                let coeffs = truncated_product(ca, cb, len);
                LaurentScalar(Repr::Unit {
                    val: va + vb,
                    coeffs,
                })
            }
        }
    }

    pub fn invert(&self) -> Result<Self, ScalarError> {
        match &self.0 {
            Repr::Exact => Err(ScalarError::DivisionByZero),
            Repr::ZeroMod(b) => Err(ScalarError::InexactZero(*b)),
            Repr::Unit { val, coeffs } => Ok(LaurentScalar(Repr::Unit {
                val: -val,
                coeffs: series_inverse(coeffs),
            })),
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self, ScalarError> {
        Ok(self.mul(&other.invert()?))
    }

    /// Equality up to the precision both sides carry.
    pub fn eq_at_precision(&self, other: &Self) -> bool {
        self.sub(other).is_zero_at_precision()
    }

    /// The residue class at valuation zero, if the value is integral.
    pub fn residue(&self) -> Option<Rational> {
        match &self.0 {
            Repr::Unit { val, coeffs } if *val == 0 => Some(coeffs[0].clone()),
            Repr::Unit { val, .. } if *val > 0 => Some(Rational::zero()),
            Repr::Unit { .. } => None,
            Repr::Exact => Some(Rational::zero()),
            Repr::ZeroMod(b) => (*b >= 1).then(Rational::zero),
        }
    }

    /// Nonzero digits as `(exponent, coefficient)` pairs.
    pub fn terms(&self) -> Vec<(i64, Rational)> {
        match &self.0 {
            Repr::Unit { val, coeffs } => coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (val + i as i64, c.clone()))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn to_json(&self) -> ScalarJson {
        ScalarJson {
            valuation: match self.valuation() {
                Valuation::Finite(v) | Valuation::AtLeast(v) => Some(v),
                Valuation::Infinite => None,
            },
            coefficients: self
                .unit_coefficients()
                .iter()
                .map(|c| c.to_string())
                .collect(),
            precision: self.relative_precision(),
        }
    }
}

fn low_exponent(r: &Repr) -> i64 {
    match r {
        Repr::Exact => i64::MAX,
        Repr::ZeroMod(b) => *b,
        Repr::Unit { val, .. } => *val,
    }
}

/// Product of two power series truncated to `len` terms, skipping zero digits.
pub(crate) fn truncated_product(a: &[Rational], b: &[Rational], len: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            if !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

/// Inverse of a power series with nonzero constant term, to the same length.
pub(crate) fn series_inverse(u: &[Rational]) -> Vec<Rational> {
    let n = u.len();
    let inv0 = u[0].recip();
    let mut out = vec![Rational::zero(); n];
    out[0] = inv0.clone();
    for k in 1..n {
        let mut s = Rational::zero();
        for i in 1..=k {
            if !u[i].is_zero() && !out[k - i].is_zero() {
                s += &u[i] * &out[k - i];
            }
        }
        out[k] = -s * &inv0;
    }
    out
}

impl PartialEq for LaurentScalar {
    fn eq(&self, other: &Self) -> bool {
        self.eq_at_precision(other)
    }
}

/// Wire form `{valuation, coefficients[], precision}`.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ScalarJson {
    pub valuation: Option<i64>,
    pub coefficients: Vec<String>,
    pub precision: usize,
}

impl Serialize for LaurentScalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

pub(crate) fn fmt_rational_coeff(
    f: &mut fmt::Formatter<'_>,
    c: &Rational,
    first: bool,
    unit_factor: bool,
) -> fmt::Result {
    let neg = c.is_negative();
    let a = c.abs();
    match (first, neg) {
        (true, true) => write!(f, "-")?,
        (false, true) => write!(f, " - ")?,
        (false, false) => write!(f, " + ")?,
        _ => {}
    }
    if !(unit_factor && a.is_one()) {
        write!(f, "{a}")?;
    }
    Ok(())
}

pub(crate) fn fmt_t_power(f: &mut fmt::Formatter<'_>, k: i64, need_star: bool) -> fmt::Result {
    if k == 0 {
        return Ok(());
    }
    if need_star {
        write!(f, "*")?;
    }
    match k {
        1 => write!(f, "t"),
        _ => write!(f, "t^{k}"),
    }
}

impl fmt::Display for LaurentScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms();
        if terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in terms.iter().enumerate() {
            let bare = *k != 0 && c.abs().is_one();
            fmt_rational_coeff(f, c, i == 0, *k != 0)?;
            fmt_t_power(f, *k, !bare)?;
        }
        Ok(())
    }
}

/// Orders nonzero scalars by norm: larger norm (smaller valuation) first.
pub fn cmp_norm(a: &LaurentScalar, b: &LaurentScalar) -> Ordering {
    a.valuation()
        .lower_bound()
        .cmp(&b.valuation().lower_bound())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(k: i64) -> LaurentScalar {
        LaurentScalar::t_pow(k, 8)
    }

    fn int(n: i64) -> LaurentScalar {
        LaurentScalar::from_int(n, 8)
    }

    #[test]
    fn cancellation_of_polar_part() {
        let a = t(-1).add(&int(1));
        let r = a.add(&t(-1).neg());
        assert_eq!(r.valuation(), Valuation::Finite(0));
        assert!(r.eq_at_precision(&int(1)));
        // absolute precision is capped by the inputs: t^-1 + 1 is known mod t^7
        assert_eq!(r.absolute_precision(), Some(7));
    }

    #[test]
    fn geometric_identity() {
        let p = 8;
        let one_minus_t = int(1).sub(&t(1));
        let mut geo = LaurentScalar::zero();
        for k in 0..p {
            geo = geo.add(&t(k));
        }
        let prod = one_minus_t.mul(&geo);
        assert!(prod.eq_at_precision(&int(1)));
    }

    #[test]
    fn valuation_is_additive() {
        let x = t(3).mul(&int(2).add(&t(2)));
        assert_eq!(x.valuation(), Valuation::Finite(3));
    }

    #[test]
    fn invert_examples() {
        assert!(t(1).invert().unwrap().eq_at_precision(&t(-1)));
        let inv = int(1).sub(&t(1)).invert().unwrap();
        for k in 0..8 {
            assert_eq!(inv.coefficient(k), Some(rat(1)));
        }
        assert_eq!(
            LaurentScalar::zero_mod(8).invert(),
            Err(ScalarError::InexactZero(8))
        );
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(
            int(2).mul(&t(3)).add(&t(5)).valuation(),
            Valuation::Finite(3)
        );
        assert_eq!(int(1).valuation(), Valuation::Finite(0));
        assert_eq!(t(-2).add(&int(1)).valuation(), Valuation::Finite(-2));
        assert_eq!(
            LaurentScalar::zero_mod(4).valuation(),
            Valuation::AtLeast(4)
        );
    }

    #[test]
    fn inexact_zero_equals_small_values() {
        let z = LaurentScalar::zero_mod(5);
        assert!(z.eq_at_precision(&t(6)));
        assert!(!z.eq_at_precision(&t(3)));
        assert_eq!(z.zero_test(), ZeroTest::IndistinguishableAtPrecision);
        assert_eq!(LaurentScalar::zero().zero_test(), ZeroTest::Zero);
        assert_eq!(t(0).zero_test(), ZeroTest::NonZero);
    }

    #[test]
    fn nonzero_integers_are_units() {
        for m in [-7, -1, 1, 2, 1000, 123456789] {
            assert_eq!(int(m).valuation(), Valuation::Finite(0));
        }
    }

    #[test]
    fn display_round_trips_visually() {
        let x = t(-1).mul(&int(3)).add(&rat_scalar(1, 2)).sub(&t(2));
        assert_eq!(x.to_string(), "3*t^-1 + 1/2 - t^2");
        assert_eq!(LaurentScalar::zero_mod(3).to_string(), "0");
    }

    fn rat_scalar(n: i64, d: i64) -> LaurentScalar {
        LaurentScalar::from_rational(Rational::new(BigInt::from(n), BigInt::from(d)), 8)
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(t(3).mul(&int(2))).unwrap();
        assert_eq!(v["valuation"], 3);
        assert_eq!(v["precision"], 8);
        assert_eq!(v["coefficients"][0], "2");
    }
}
