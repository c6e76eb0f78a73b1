use std::fmt;

use num_traits::{One, Zero};

use crate::scalars::{series_inverse, truncated_product, LaurentScalar, Rational};
use crate::tate::write_term;

/// Polynomial in `t` over ℚ, coefficients from the constant term up.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct QPoly(Vec<Rational>);

impl QPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        QPoly(coeffs)
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    pub fn t_pow(k: usize) -> Self {
        let mut v = vec![Rational::zero(); k + 1];
        v[k] = Rational::one();
        QPoly(v)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn lead(&self) -> Option<&Rational> {
        self.0.last()
    }

    /// Order of vanishing at `t = 0`.
    pub fn order(&self) -> Option<usize> {
        self.0.iter().position(|c| !c.is_zero())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        let z = Rational::zero();
        Self::new(
            (0..n)
                .map(|i| self.0.get(i).unwrap_or(&z) + other.0.get(i).unwrap_or(&z))
                .collect(),
        )
    }

    pub fn neg(&self) -> Self {
        QPoly(self.0.iter().map(|c| -c.clone()).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return QPoly::default();
        }
        let n = self.0.len() + other.0.len() - 1;
        Self::new(truncated_product(&self.0, &other.0, n))
    }

    pub fn scale(&self, q: &Rational) -> Self {
        Self::new(self.0.iter().map(|c| c * q).collect())
    }

    /// Drops the factor `t^k`, assuming it divides.
    fn unshift(&self, k: usize) -> Self {
        QPoly(self.0[k..].to_vec())
    }

    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        let dd = d.degree().expect("division by zero polynomial");
        let lead_inv = d.lead().unwrap().recip();
        let mut rem = self.0.clone();
        if rem.len() <= dd {
            return (QPoly::default(), self.clone());
        }
        let mut quot = vec![Rational::zero(); rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let c = &rem[k + dd] * &lead_inv;
            if c.is_zero() {
                continue;
            }
            for (i, di) in d.0.iter().enumerate() {
                rem[k + i] -= &c * di;
            }
            quot[k] = c;
        }
        (Self::new(quot), Self::new(rem))
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn monic(&self) -> Self {
        match self.lead() {
            Some(l) => self.scale(&l.recip()),
            None => self.clone(),
        }
    }
}

/// Element of ℚ(t) as a reduced fraction with monic denominator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RatFunc {
    num: QPoly,
    den: QPoly,
}

impl RatFunc {
    pub fn new(num: QPoly, den: QPoly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Self::zero();
        }
        let g = num.gcd(&den);
        let (n, _) = num.div_rem(&g);
        let (d, _) = den.div_rem(&g);
        let l = d.lead().unwrap().recip();
        RatFunc {
            num: n.scale(&l),
            den: d.scale(&l),
        }
    }

    pub fn zero() -> Self {
        RatFunc {
            num: QPoly::default(),
            den: QPoly::constant(Rational::one()),
        }
    }

    pub fn one() -> Self {
        Self::from_rational(Rational::one())
    }

    pub fn from_rational(q: Rational) -> Self {
        RatFunc {
            num: QPoly::constant(q),
            den: QPoly::constant(Rational::one()),
        }
    }

    pub fn t_pow(k: i64) -> Self {
        if k >= 0 {
            RatFunc {
                num: QPoly::t_pow(k as usize),
                den: QPoly::constant(Rational::one()),
            }
        } else {
            RatFunc {
                num: QPoly::constant(Rational::one()),
                den: QPoly::t_pow((-k) as usize),
            }
        }
    }

    pub fn numerator(&self) -> &QPoly {
        &self.num
    }

    pub fn denominator(&self) -> &QPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.den == other.den {
            return Self::new(self.num.add(&other.num), self.den.clone());
        }
        Self::new(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn neg(&self) -> Self {
        RatFunc {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn scale(&self, q: &Rational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        RatFunc {
            num: self.num.scale(q),
            den: self.den.clone(),
        }
    }

    pub fn inv(&self) -> Option<Self> {
        (!self.is_zero()).then(|| Self::new(self.den.clone(), self.num.clone()))
    }

    pub fn div(&self, other: &Self) -> Option<Self> {
        Some(self.mul(&other.inv()?))
    }

    pub fn pow(&self, k: i64) -> Option<Self> {
        let base = if k < 0 { self.inv()? } else { self.clone() };
        Some((0..k.unsigned_abs()).fold(Self::one(), |acc, _| acc.mul(&base)))
    }

    /// t-adic valuation; `None` for zero.
    pub fn valuation(&self) -> Option<i64> {
        Some(self.num.order()? as i64 - self.den.order().unwrap() as i64)
    }

    /// Laurent expansion at `t = 0` with relative precision `prec`.
    pub fn to_laurent(&self, prec: usize) -> LaurentScalar {
        let Some(on) = self.num.order() else {
            return LaurentScalar::zero();
        };
        let od = self.den.order().unwrap();
        let mut n = self.num.unshift(on).0;
        let mut d = self.den.unshift(od).0;
        n.resize(n.len().max(prec), Rational::zero());
        d.resize(d.len().max(prec), Rational::zero());
        let inv = series_inverse(&d[..prec]);
        let coeffs = truncated_product(&n[..prec], &inv, prec);
        LaurentScalar::from_coeffs(on as i64 - od as i64, coeffs)
    }

    /// Denominator is a power of `t`.
    pub fn is_laurent_polynomial(&self) -> bool {
        self.den.0.iter().rev().skip(1).all(Zero::is_zero)
    }

    /// Terms `(k, q)` of `q t^k` when the value is a Laurent polynomial.
    pub fn laurent_terms(&self) -> Option<Vec<(i64, Rational)>> {
        if !self.is_laurent_polynomial() {
            return None;
        }
        let shift = self.den.degree().unwrap() as i64;
        Some(
            self.num
                .0
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (i as i64 - shift, c.clone()))
                .collect(),
        )
    }

    /// Single term `q t^k`, if the value has that shape.
    pub fn as_monomial(&self) -> Option<(i64, Rational)> {
        let terms = self.laurent_terms()?;
        (terms.len() == 1).then(|| terms[0].clone())
    }
}

fn write_qpoly(f: &mut fmt::Formatter<'_>, p: &QPoly) -> fmt::Result {
    let one = crate::monomial::Monomial(Vec::new());
    let mut first = true;
    for (k, c) in p.0.iter().enumerate() {
        if !c.is_zero() {
            write_term(f, c, k as i64, &one, None, first)?;
            first = false;
        }
    }
    if first {
        write!(f, "0")?;
    }
    Ok(())
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one = crate::monomial::Monomial(Vec::new());
        if let Some(terms) = self.laurent_terms() {
            if terms.is_empty() {
                return write!(f, "0");
            }
            for (i, (k, c)) in terms.iter().enumerate() {
                write_term(f, c, *k, &one, None, i == 0)?;
            }
            return Ok(());
        }
        write!(f, "(")?;
        write_qpoly(f, &self.num)?;
        write!(f, ")*(")?;
        write_qpoly(f, &self.den)?;
        write!(f, ")^-1")
    }
}

impl RatFunc {
    /// Display wrapped in parentheses unless it is a single term.
    pub(crate) fn fmt_factor(&self) -> String {
        match self.as_monomial() {
            Some(_) => self.to_string(),
            None => format!("({self})"),
        }
    }
}
