use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::monomial::{fmt_monomial, Monomial};
use crate::scalars::{rat, truncated_product, LaurentScalar, Rational, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TateError {
    #[error("element is not a scalar times a contraction at this precision")]
    NotAUnit,
}

/// Element of the Tate algebra at finite relative t-adic precision.
///
/// Stored as `t^scale · Σ body[α](t) x^α` where each `body[α]` is a
/// polynomial in `t` of length at most `prec` and some `body[α]` has a
/// nonzero constant term. A zero element keeps only the bound `t^scale`
/// below which it is known to vanish (`i64::MAX` for an exact zero).
#[derive(Debug, Clone)]
pub struct TateElement {
    vars: usize,
    prec: usize,
    scale: i64,
    body: BTreeMap<Monomial, Vec<Rational>>,
}

type Body = BTreeMap<Monomial, Vec<Rational>>;

impl TateElement {
    pub fn zero(vars: usize) -> Self {
        TateElement {
            vars,
            prec: 0,
            scale: i64::MAX,
            body: Body::new(),
        }
    }

    /// Zero known only modulo `t^bound`.
    pub fn zero_mod(vars: usize, bound: i64) -> Self {
        TateElement {
            vars,
            prec: 0,
            scale: bound,
            body: Body::new(),
        }
    }

    pub fn from_scalar(vars: usize, c: &LaurentScalar) -> Self {
        Self::monomial(vars, c, Monomial::one(vars))
    }

    pub fn one(vars: usize, prec: usize) -> Self {
        Self::from_scalar(vars, &LaurentScalar::one(prec))
    }

    /// The coordinate `x_i` (0-based).
    pub fn var(vars: usize, i: usize, prec: usize) -> Self {
        Self::monomial(vars, &LaurentScalar::one(prec), Monomial::var(vars, i))
    }

    /// `c · x^m`.
    pub fn monomial(vars: usize, c: &LaurentScalar, m: Monomial) -> Self {
        assert_eq!(m.vars(), vars, "monomial arity mismatch");
        match c.valuation() {
            Valuation::Infinite => Self::zero(vars),
            Valuation::AtLeast(b) => Self::zero_mod(vars, b),
            Valuation::Finite(v) => {
                let coeffs = c.unit_coefficients().to_vec();
                let prec = coeffs.len();
                let mut body = Body::new();
                body.insert(m, coeffs);
                normalize(vars, v, v + prec as i64, body)
            }
        }
    }

    /// Sum of `c · x^m` over the given terms.
    pub fn from_terms<I>(vars: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, LaurentScalar)>,
    {
        terms.into_iter().fold(Self::zero(vars), |acc, (m, c)| {
            acc.add(&Self::monomial(vars, &c, m))
        })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    /// Relative precision: the number of t-digits carried below the norm.
    pub fn precision(&self) -> usize {
        self.prec
    }

    /// Exponent `a` such that the element is known modulo `t^a`.
    pub fn absolute_precision(&self) -> Option<i64> {
        let cap = self.cap();
        (cap != i64::MAX).then_some(cap)
    }

    fn cap(&self) -> i64 {
        if self.body.is_empty() {
            self.scale
        } else {
            self.scale.saturating_add(self.prec as i64)
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        self.body.is_empty() && self.scale == i64::MAX
    }

    pub fn is_zero_at_precision(&self) -> bool {
        self.body.is_empty()
    }

    /// `v` with `|f| = |t|^v`; a lower bound for an inexact zero.
    pub fn gauss_norm(&self) -> Valuation {
        if !self.body.is_empty() {
            Valuation::Finite(self.scale)
        } else if self.scale == i64::MAX {
            Valuation::Infinite
        } else {
            Valuation::AtLeast(self.scale)
        }
    }

    pub fn support(&self) -> impl Iterator<Item = &Monomial> {
        self.body.keys()
    }

    /// Largest total x-degree in the support.
    pub fn degree(&self) -> Option<u32> {
        self.body.keys().map(Monomial::degree).max()
    }

    pub fn coefficient(&self, m: &Monomial) -> LaurentScalar {
        match self.body.get(m) {
            Some(v) => {
                let mut padded = v.clone();
                padded.resize(self.prec, Rational::zero());
                LaurentScalar::from_coeffs(self.scale, padded)
            }
            None if self.is_exact_zero() => LaurentScalar::zero(),
            None => LaurentScalar::zero_mod(self.cap()),
        }
    }

    /// Nonzero coefficients, largest monomial first.
    pub fn terms(&self) -> Vec<(Monomial, LaurentScalar)> {
        self.body
            .keys()
            .rev()
            .map(|m| (m.clone(), self.coefficient(m)))
            .collect()
    }

    /// Constant term as a scalar.
    pub fn constant_term(&self) -> LaurentScalar {
        self.coefficient(&Monomial::one(self.vars))
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for v in out.body.values_mut() {
            for c in v.iter_mut() {
                *c = -c.clone();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars, "variable count mismatch");
        if self.is_exact_zero() {
            return other.clone();
        }
        if other.is_exact_zero() {
            return self.clone();
        }
        let cap = self.cap().min(other.cap());
        let base = self.scale.min(other.scale);
        if cap <= base {
            return Self::zero_mod(self.vars, cap);
        }
        let mut body = Body::new();
        for src in [self, other] {
            let off = (src.scale - base) as usize;
            for (m, v) in &src.body {
                let slot = body.entry(m.clone()).or_default();
                if slot.len() < off + v.len() {
                    slot.resize(off + v.len(), Rational::zero());
                }
                for (k, c) in v.iter().enumerate() {
                    if !c.is_zero() {
                        slot[off + k] += c;
                    }
                }
            }
        }
        normalize(self.vars, base, cap, body)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars, "variable count mismatch");
        if self.is_exact_zero() || other.is_exact_zero() {
            return Self::zero(self.vars);
        }
        if self.body.is_empty() || other.body.is_empty() {
            return Self::zero_mod(self.vars, self.scale.saturating_add(other.scale));
        }
        let prec = self.prec.min(other.prec);
        let mut body = Body::new();
        for (ma, va) in &self.body {
            for (mb, vb) in &other.body {
                let prod = truncated_product(va, vb, prec);
                let slot = body
                    .entry(ma.mul(mb))
                    .or_insert_with(|| vec![Rational::zero(); prec]);
                for (s, p) in slot.iter_mut().zip(prod) {
                    if !p.is_zero() {
                        *s += p;
                    }
                }
            }
        }
        let scale = self.scale + other.scale;
        normalize(self.vars, scale, scale + prec as i64, body)
    }

    /// Multiplication by a scalar.
    pub fn scale_by(&self, c: &LaurentScalar) -> Self {
        self.mul(&Self::from_scalar(self.vars, c))
    }

    /// Multiplication by `t^k`.
    pub fn shift(&self, k: i64) -> Self {
        let mut out = self.clone();
        if !out.is_exact_zero() {
            out.scale += k;
        }
        out
    }

    /// Forgets all digits at or above `t^abs`.
    pub fn truncate_absolute(&self, abs: i64) -> Self {
        if abs >= self.cap() {
            return self.clone();
        }
        normalize(
            self.vars,
            self.scale.min(abs),
            abs,
            self.body_from(self.scale.min(abs)),
        )
    }

    /// Body re-expressed relative to `t^base` with `base ≤ scale`.
    fn body_from(&self, base: i64) -> Body {
        let off = (self.scale - base) as usize;
        self.body
            .iter()
            .map(|(m, v)| {
                let mut w = vec![Rational::zero(); off];
                w.extend(v.iter().cloned());
                (m.clone(), w)
            })
            .collect()
    }

    /// Partial derivative in `x_i` (0-based).
    pub fn derivative(&self, i: usize) -> Self {
        assert!(i < self.vars, "variable index out of range");
        if self.body.is_empty() {
            return self.clone();
        }
        let mut body = Body::new();
        for (m, v) in &self.body {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.0[i] -= 1;
            let f = rat(e as i64);
            body.insert(dm, v.iter().map(|c| c * &f).collect());
        }
        normalize(self.vars, self.scale, self.cap(), body)
    }

    /// Antiderivative in `x_i` with no terms free of `x_i`.
    pub fn integrate(&self, i: usize) -> Self {
        assert!(i < self.vars, "variable index out of range");
        if self.body.is_empty() {
            return self.clone();
        }
        let mut body = Body::new();
        for (m, v) in &self.body {
            let mut im = m.clone();
            im.0[i] += 1;
            let f = rat(im.0[i] as i64).recip();
            body.insert(im, v.iter().map(|c| c * &f).collect());
        }
        normalize(self.vars, self.scale, self.cap(), body)
    }

    /// Inverse of `c(1 + h)` with `|h| < 1`, as `c⁻¹ Σ (-h)^k`.
    pub fn invert_unit(&self) -> Result<Self, TateError> {
        if self.body.is_empty() {
            return Err(TateError::NotAUnit);
        }
        let one_m = Monomial::one(self.vars);
        let lead_ok = self.body.iter().all(|(m, v)| {
            let c0 = v.first().is_none_or(Zero::is_zero);
            if *m == one_m {
                !c0
            } else {
                c0
            }
        });
        if !lead_ok || !self.body.contains_key(&one_m) {
            return Err(TateError::NotAUnit);
        }
        let c = self.constant_term();
        let c_inv = c.invert().map_err(|_| TateError::NotAUnit)?;
        let h = self.scale_by(&c_inv).sub(&Self::one(self.vars, self.prec));
        let minus_h = h.neg();
        let mut sum = Self::one(self.vars, self.prec);
        let mut power = Self::one(self.vars, self.prec);
        for _ in 1..self.prec {
            power = power.mul(&minus_h);
            if power.is_zero_at_precision() {
                break;
            }
            sum = sum.add(&power);
        }
        let inv = sum.scale_by(&c_inv);
        let check = self.mul(&inv).sub(&Self::one(self.vars, self.prec));
        if check.gauss_norm().lower_bound() < self.prec as i64 {
            return Err(TateError::NotAUnit);
        }
        Ok(inv)
    }

    pub fn eq_at_precision(&self, other: &Self) -> bool {
        self.sub(other).is_zero_at_precision()
    }

    pub fn to_json(&self) -> TateJson {
        TateJson {
            scale: (self.scale != i64::MAX).then_some(self.scale),
            terms: self
                .body
                .iter()
                .rev()
                .map(|(m, v)| TateTermJson {
                    exponents: m.0.clone(),
                    t_poly: v.iter().map(ToString::to_string).collect(),
                })
                .collect(),
            precision: self.prec,
        }
    }

    /// Flat list `(q, k, α)` of the terms `q t^k x^α`.
    pub(crate) fn flat_terms(&self) -> Vec<(Rational, i64, Monomial)> {
        let mut out = Vec::new();
        for (m, v) in self.body.iter().rev() {
            for (k, c) in v.iter().enumerate() {
                if !c.is_zero() {
                    out.push((c.clone(), self.scale + k as i64, m.clone()));
                }
            }
        }
        out
    }
}

fn normalize(vars: usize, base: i64, cap: i64, mut body: Body) -> TateElement {
    let keep = if cap == i64::MAX {
        usize::MAX
    } else {
        (cap - base).max(0) as usize
    };
    let mut lead = usize::MAX;
    body.retain(|_, v| {
        v.truncate(keep);
        while v.last().is_some_and(Zero::is_zero) {
            v.pop();
        }
        if let Some(p) = v.iter().position(|c| !c.is_zero()) {
            lead = lead.min(p);
        }
        !v.is_empty()
    });
    if body.is_empty() {
        return if cap == i64::MAX {
            TateElement::zero(vars)
        } else {
            TateElement::zero_mod(vars, cap)
        };
    }
    for v in body.values_mut() {
        v.drain(..lead.min(v.len()));
    }
    body.retain(|_, v| !v.is_empty());
    let scale = base + lead as i64;
    TateElement {
        vars,
        prec: (cap - scale) as usize,
        scale,
        body,
    }
}

impl PartialEq for TateElement {
    fn eq(&self, other: &Self) -> bool {
        self.eq_at_precision(other)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct TateTermJson {
    pub exponents: Vec<u32>,
    #[serde(rename = "tPoly")]
    pub t_poly: Vec<String>,
}

/// Wire form `{scale, terms:[{exponents, tPoly}], precision}`.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct TateJson {
    pub scale: Option<i64>,
    pub terms: Vec<TateTermJson>,
    pub precision: usize,
}

impl Serialize for TateElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Writes one product term `q * t^k * x^α * d^β` of a flat sum.
pub(crate) fn write_term(
    f: &mut fmt::Formatter<'_>,
    q: &Rational,
    k: i64,
    x: &Monomial,
    d: Option<(&Monomial, &str)>,
    first: bool,
) -> fmt::Result {
    let has_factor = k != 0 || !x.is_one() || d.is_some_and(|(m, _)| !m.is_one());
    let neg = q < &Rational::zero();
    match (first, neg) {
        (true, true) => write!(f, "-")?,
        (false, true) => write!(f, " - ")?,
        (false, false) => write!(f, " + ")?,
        _ => {}
    }
    let a = if neg { -q.clone() } else { q.clone() };
    let mut need_star = false;
    if !(has_factor && a.is_one()) {
        write!(f, "{a}")?;
        need_star = true;
    }
    if k != 0 {
        if need_star {
            write!(f, "*")?;
        }
        if k == 1 {
            write!(f, "t")?;
        } else {
            write!(f, "t^{k}")?;
        }
        need_star = true;
    }
    if !x.is_one() {
        if need_star {
            write!(f, "*")?;
        }
        fmt_monomial(f, x, "x")?;
        need_star = true;
    }
    if let Some((m, stem)) = d.filter(|(m, _)| !m.is_one()) {
        if need_star {
            write!(f, "*")?;
        }
        fmt_monomial(f, m, stem)?;
    }
    Ok(())
}

impl fmt::Display for TateElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.flat_terms();
        if terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (q, k, m)) in terms.iter().enumerate() {
            write_term(f, q, *k, m, None, i == 0)?;
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: usize = 8;

    fn c(n: i64, k: i64) -> LaurentScalar {
        LaurentScalar::monomial(rat(n), k, P)
    }

    fn x(e: u32) -> Monomial {
        Monomial(vec![e])
    }

    fn term(n: i64, k: i64, e: u32) -> TateElement {
        TateElement::monomial(1, &c(n, k), x(e))
    }

    #[test]
    fn ring_examples() {
        let a = term(1, 0, 0).add(&term(1, 1, 1));
        let b = term(1, 0, 0).add(&term(-1, 1, 1));
        assert_eq!(a.mul(&b), term(1, 0, 0).add(&term(-1, 2, 2)));

        let z = term(1, 0, 1).add(&term(-1, 0, 1));
        assert!(z.is_zero_at_precision() && !z.is_exact_zero());
        assert_eq!(z.gauss_norm(), Valuation::AtLeast(8));

        let p = term(1, -1, 1).mul(&term(1, 1, 1));
        assert_eq!(p, term(1, 0, 2));
        assert_eq!(p.gauss_norm(), Valuation::Finite(0));
    }

    #[test]
    fn gauss_norm_examples() {
        assert_eq!(
            term(1, 0, 1).add(&term(1, 1, 0)).gauss_norm(),
            Valuation::Finite(0)
        );
        assert_eq!(
            term(1, -2, 3).add(&term(1, 1, 1)).gauss_norm(),
            Valuation::Finite(-2)
        );
        assert_eq!(term(1, 5, 0).gauss_norm(), Valuation::Finite(5));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(term(1, 0, 3).derivative(0), term(3, 0, 2));
        assert_eq!(term(1, -1, 1).derivative(0), term(1, -1, 0));
        assert!(term(1, 0, 0).derivative(0).is_zero_at_precision());
    }

    #[test]
    fn integrate_examples() {
        let third =
            TateElement::monomial(1, &LaurentScalar::from_rational(rat(1) / rat(3), P), x(3));
        assert_eq!(term(1, 0, 2).integrate(0), third);
        assert_eq!(term(1, 0, 0).integrate(0), term(1, 0, 1));
        assert_eq!(
            term(1, -1, 4).integrate(0).gauss_norm(),
            Valuation::Finite(-1)
        );
    }

    #[test]
    fn invert_examples() {
        let f = term(1, 0, 0).add(&term(-1, 1, 1));
        let inv = f.invert_unit().unwrap();
        let expected = (0..P as u32).fold(TateElement::zero(1), |acc, k| {
            acc.add(&term(1, k as i64, k))
        });
        assert_eq!(inv, expected);
        assert_eq!(term(1, 1, 0).invert_unit().unwrap(), term(1, -1, 0));
        assert_eq!(term(1, 0, 1).invert_unit(), Err(TateError::NotAUnit));
    }

    #[test]
    fn display_and_json() {
        let f = term(1, -2, 3).add(&term(-1, 1, 1)).add(&term(3, 0, 0));
        assert_eq!(f.to_string(), "t^-2*x1^3 - t*x1 + 3");
        let j = serde_json::to_value(term(2, 1, 1)).unwrap();
        assert_eq!(j["scale"], 1);
        assert_eq!(j["terms"][0]["exponents"][0], 1);
        assert_eq!(j["terms"][0]["tPoly"][0], "2");
    }

    /// Random elements in two variables with small supports.
    pub(crate) fn arb_tate(vars: usize) -> impl Strategy<Value = TateElement> {
        prop::collection::vec(
            (prop::collection::vec(0u32..3, vars), -2i64..3, -4i64..5),
            1..5,
        )
        .prop_map(move |ts| {
            TateElement::from_terms(vars, ts.into_iter().map(|(e, k, n)| (Monomial(e), c(n, k))))
        })
    }

    proptest! {
        #[test]
        fn norm_is_multiplicative(f in arb_tate(2), g in arb_tate(2)) {
            prop_assume!(!f.is_zero_at_precision() && !g.is_zero_at_precision());
            let n = |h: &TateElement| h.gauss_norm().finite().unwrap();
            prop_assert_eq!(n(&f.mul(&g)), n(&f) + n(&g));
        }

        #[test]
        fn derivative_inverts_integral(f in arb_tate(2), i in 0usize..2) {
            prop_assert_eq!(f.integrate(i).derivative(i), f);
        }

        #[test]
        fn leibniz(f in arb_tate(2), g in arb_tate(2), i in 0usize..2) {
            let lhs = f.mul(&g).derivative(i);
            let rhs = f.derivative(i).mul(&g).add(&f.mul(&g.derivative(i)));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn support_is_bounded(f in arb_tate(2), g in arb_tate(2)) {
            let n = |h: &TateElement| h.support().count();
            prop_assert!(n(&f.add(&g)) <= n(&f) + n(&g));
            prop_assert!(n(&f.mul(&g)) <= n(&f) * n(&g));
        }
    }
}
