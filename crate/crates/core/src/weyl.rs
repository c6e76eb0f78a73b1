use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::monomial::{binomial, Monomial};
use crate::scalars::{rat, LaurentScalar, Valuation};
use crate::tate::{write_term, TateElement, TateJson};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeylError {
    #[error("operator is not a scalar times one minus a contraction")]
    NotAUnit,
    #[error("operator vanishes at the working precision")]
    InexactZero,
}

/// Differential operator `Σ f_α ∂^α` with Tate coefficients on the left.
#[derive(Debug, Clone)]
pub struct WeylOperator {
    vars: usize,
    prec: usize,
    terms: BTreeMap<Monomial, TateElement>,
}

impl WeylOperator {
    pub fn zero(vars: usize, prec: usize) -> Self {
        WeylOperator {
            vars,
            prec,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(vars: usize, prec: usize) -> Self {
        Self::from_tate(TateElement::one(vars, prec), prec)
    }

    pub fn from_tate(f: TateElement, prec: usize) -> Self {
        let vars = f.vars();
        Self::from_terms(vars, prec, [(Monomial::one(vars), f)])
    }

    pub fn scalar(vars: usize, c: &LaurentScalar, prec: usize) -> Self {
        Self::from_tate(TateElement::from_scalar(vars, c), prec)
    }

    /// `∂_i` (0-based).
    pub fn d(vars: usize, i: usize, prec: usize) -> Self {
        Self::from_terms(
            vars,
            prec,
            [(Monomial::var(vars, i), TateElement::one(vars, prec))],
        )
    }

    /// `x_i` (0-based).
    pub fn x(vars: usize, i: usize, prec: usize) -> Self {
        Self::from_tate(TateElement::var(vars, i, prec), prec)
    }

    /// Builds `Σ f_α ∂^α`, merging repeated `α`.
    pub fn from_terms<I>(vars: usize, prec: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, TateElement)>,
    {
        let mut out = Self::zero(vars, prec);
        for (a, f) in terms {
            out.add_term(a, &f);
        }
        out.renormalize();
        out
    }

    /// Drops every digit at or beyond `t^(norm + prec)`, so the operator is
    /// known modulo `t^prec` times its unit ball.
    fn renormalize(&mut self) {
        let Some(v) = self.operator_norm().finite() else {
            return;
        };
        let cap = v + self.prec as i64;
        self.terms = std::mem::take(&mut self.terms)
            .into_iter()
            .map(|(a, f)| (a, f.truncate_absolute(cap)))
            .filter(|(_, f)| !f.is_zero_at_precision())
            .collect();
    }

    fn add_term(&mut self, alpha: Monomial, f: &TateElement) {
        if f.is_zero_at_precision() {
            return;
        }
        let slot = self
            .terms
            .entry(alpha.clone())
            .or_insert_with(|| TateElement::zero(self.vars));
        *slot = slot.add(f);
        if slot.is_zero_at_precision() {
            self.terms.remove(&alpha);
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn precision(&self) -> usize {
        self.prec
    }

    /// `(α, f_α)` pairs with nonzero coefficient, largest `α` first.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &TateElement)> {
        self.terms.iter().rev()
    }

    pub fn coefficient(&self, alpha: &Monomial) -> TateElement {
        self.terms
            .get(alpha)
            .cloned()
            .unwrap_or_else(|| TateElement::zero(self.vars))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.prec = self.prec.min(other.prec);
        for (a, f) in &other.terms {
            out.add_term(a.clone(), f);
        }
        out.renormalize();
        out
    }

    pub fn neg(&self) -> Self {
        WeylOperator {
            vars: self.vars,
            prec: self.prec,
            terms: self
                .terms
                .iter()
                .map(|(a, f)| (a.clone(), f.neg()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Left multiplication by a Tate element.
    pub fn left_mul_tate(&self, g: &TateElement) -> Self {
        Self::from_terms(
            self.vars,
            self.prec,
            self.terms.iter().map(|(a, f)| (a.clone(), g.mul(f))),
        )
    }

    pub fn scale_by(&self, c: &LaurentScalar) -> Self {
        self.left_mul_tate(&TateElement::from_scalar(self.vars, c))
    }

    /// Normal-form product via `∂^α g = Σ_γ binom(α,γ) ∂^γ(g) ∂^(α-γ)`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars, "variable count mismatch");
        let mut out = Self::zero(self.vars, self.prec.min(other.prec));
        let mut derivs: HashMap<(Monomial, Monomial), TateElement> = HashMap::new();
        for (alpha, f) in &self.terms {
            for gamma in alpha.divisors() {
                let rest = gamma.quotient_of(alpha);
                let b = rat(binomial(alpha, &gamma) as i64);
                for (beta, g) in &other.terms {
                    let dg = derivs
                        .entry((gamma.clone(), beta.clone()))
                        .or_insert_with(|| apply_monomial(&gamma, g))
                        .clone();
                    if dg.is_zero_at_precision() {
                        continue;
                    }
                    let coeff = f
                        .mul(&dg)
                        .scale_by(&LaurentScalar::from_rational(b.clone(), out.prec));
                    out.add_term(rest.mul(beta), &coeff);
                }
            }
        }
        out.renormalize();
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(self.vars, self.prec), |acc, _| acc.mul(self))
    }

    /// Action on the Tate algebra.
    pub fn apply(&self, f: &TateElement) -> TateElement {
        self.terms
            .iter()
            .fold(TateElement::zero(self.vars), |acc, (a, c)| {
                acc.add(&c.mul(&apply_monomial(a, f)))
            })
    }

    /// Formal adjoint `Σ (-1)^|α| ∂^α f_α`, renormalized.
    pub fn transpose(&self) -> Self {
        let mut out = Self::zero(self.vars, self.prec);
        for (alpha, f) in &self.terms {
            let sign = if alpha.degree() % 2 == 0 { 1 } else { -1 };
            for gamma in alpha.divisors() {
                let b = rat(sign * binomial(alpha, &gamma) as i64);
                let coeff =
                    apply_monomial(&gamma, f).scale_by(&LaurentScalar::from_rational(b, self.prec));
                out.add_term(gamma.quotient_of(alpha), &coeff);
            }
        }
        out.renormalize();
        out
    }

    /// Log operator norm: the smallest Gauss log-norm among coefficients.
    pub fn operator_norm(&self) -> Valuation {
        self.terms
            .values()
            .map(TateElement::gauss_norm)
            .min_by_key(|v| v.lower_bound())
            .unwrap_or(Valuation::Infinite)
    }

    /// Largest `|α|` in the support.
    pub fn order(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Top-order part with `∂_i` read as the commuting variable `ξ_i`.
    pub fn symbol(&self) -> Result<Symbol, WeylError> {
        let top = self.order().ok_or(WeylError::InexactZero)?;
        Ok(Symbol {
            vars: self.vars,
            terms: self
                .terms
                .iter()
                .filter(|(a, _)| a.degree() == top)
                .map(|(a, f)| (a.clone(), f.clone()))
                .collect(),
        })
    }

    /// Inverse of `c(1 - Q)` with `|Q| < 1` as `(Σ_{k<p} Q^k) c⁻¹`, checked by multiplication.
    pub fn invert_unit(&self) -> Result<Self, WeylError> {
        let zero_alpha = Monomial::one(self.vars);
        let c = self.coefficient(&zero_alpha).constant_term();
        let c_inv = c.invert().map_err(|_| WeylError::NotAUnit)?;
        let one = Self::one(self.vars, self.prec);
        let q = one.sub(&self.scale_by(&c_inv));
        if q.operator_norm().lower_bound() < 1 {
            return Err(WeylError::NotAUnit);
        }
        let mut sum = one.clone();
        let mut power = one.clone();
        for _ in 1..self.prec {
            power = power.mul(&q);
            if power.is_zero() {
                break;
            }
            sum = sum.add(&power);
        }
        let inv = sum.scale_by(&c_inv);
        if !self.mul(&inv).sub(&one).is_zero() {
            return Err(WeylError::NotAUnit);
        }
        Ok(inv)
    }

    pub fn eq_at_precision(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }

    pub fn to_json(&self) -> WeylJson {
        WeylJson {
            precision: self.prec,
            terms: self
                .terms()
                .map(|(a, f)| WeylTermJson {
                    d_exponents: a.0.clone(),
                    coefficient: f.to_json(),
                })
                .collect(),
        }
    }
}

/// `∂^α f`.
pub(crate) fn apply_monomial(alpha: &Monomial, f: &TateElement) -> TateElement {
    let mut out = f.clone();
    for (i, &e) in alpha.0.iter().enumerate() {
        for _ in 0..e {
            if out.is_zero_at_precision() {
                return out;
            }
            out = out.derivative(i);
        }
    }
    out
}

impl PartialEq for WeylOperator {
    fn eq(&self, other: &Self) -> bool {
        self.eq_at_precision(other)
    }
}

impl fmt::Display for WeylOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (alpha, c) in self.terms() {
            for (q, k, x) in c.flat_terms() {
                write_term(f, &q, k, &x, Some((alpha, "d")), first)?;
                first = false;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylTermJson {
    #[serde(rename = "dExponents")]
    pub d_exponents: Vec<u32>,
    pub coefficient: TateJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylJson {
    pub precision: usize,
    pub terms: Vec<WeylTermJson>,
}

impl Serialize for WeylOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Commutative polynomial `Σ f_α ξ^α` with Tate coefficients.
#[derive(Debug, Clone)]
pub struct Symbol {
    vars: usize,
    terms: BTreeMap<Monomial, TateElement>,
}

impl Symbol {
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &TateElement)> {
        self.terms.iter().rev()
    }

    pub fn mul(&self, other: &Symbol) -> Symbol {
        let mut terms: BTreeMap<Monomial, TateElement> = BTreeMap::new();
        for (a, f) in &self.terms {
            for (b, g) in &other.terms {
                let slot = terms
                    .entry(a.mul(b))
                    .or_insert_with(|| TateElement::zero(self.vars));
                *slot = slot.add(&f.mul(g));
            }
        }
        terms.retain(|_, f| !f.is_zero_at_precision());
        Symbol {
            vars: self.vars,
            terms,
        }
    }

    pub fn eq_at_precision(&self, other: &Symbol) -> bool {
        let keys: std::collections::BTreeSet<_> =
            self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter().all(|k| {
            let z = TateElement::zero(self.vars);
            let a = self.terms.get(k).unwrap_or(&z);
            let b = other.terms.get(k).unwrap_or(&z);
            a.eq_at_precision(b)
        })
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        self.eq_at_precision(other)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (alpha, c) in self.terms() {
            for (q, k, x) in c.flat_terms() {
                write_term(f, &q, k, &x, Some((alpha, "xi")), first)?;
                first = false;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tate::tests::arb_tate;
    use proptest::prelude::*;

    const P: usize = 8;

    fn x1() -> WeylOperator {
        WeylOperator::x(1, 0, P)
    }

    fn d1() -> WeylOperator {
        WeylOperator::d(1, 0, P)
    }

    fn s(n: i64, k: i64) -> WeylOperator {
        WeylOperator::scalar(1, &LaurentScalar::monomial(rat(n), k, P), P)
    }

    #[test]
    fn multiply_examples() {
        assert_eq!(d1().mul(&x1()), x1().mul(&d1()).add(&s(1, 0)));
        let lhs = d1().pow(2).mul(&x1());
        let rhs = x1().mul(&d1().pow(2)).add(&s(2, 0).mul(&d1()));
        assert_eq!(lhs, rhs);
        let u = s(1, 0).sub(&s(1, 1).mul(&d1()));
        let series = (0..P as u32).fold(WeylOperator::zero(1, P), |acc, k| {
            acc.add(&s(1, k as i64).mul(&d1().pow(k)))
        });
        assert_eq!(u.mul(&series), s(1, 0));
    }

    #[test]
    fn apply_examples() {
        let x = TateElement::var(1, 0, P);
        let x2 = x.mul(&x);
        let two_x2 = x2.scale_by(&LaurentScalar::from_int(2, P));
        assert_eq!(x1().mul(&d1()).apply(&x2), two_x2);
        let one = TateElement::one(1, P);
        let r = d1().sub(&s(1, -1)).apply(&one);
        assert_eq!(
            r,
            TateElement::from_scalar(1, &LaurentScalar::t_pow(-1, P).neg())
        );
        let inv = s(1, 0).sub(&s(1, 1).mul(&d1())).invert_unit().unwrap();
        assert_eq!(inv.apply(&one), one);
    }

    #[test]
    fn transpose_examples() {
        let xd = x1().mul(&d1());
        assert_eq!(xd.transpose(), xd.neg().sub(&s(1, 0)));
        let f = WeylOperator::from_tate(TateElement::var(1, 0, P).add(&TateElement::one(1, P)), P);
        assert_eq!(f.transpose(), f);
        assert_eq!(d1().pow(2).transpose(), d1().pow(2));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(
            s(1, -1).mul(&d1()).add(&x1()).operator_norm(),
            Valuation::Finite(-1)
        );
        assert_eq!(
            s(1, 0).sub(&s(1, 1).mul(&d1())).operator_norm(),
            Valuation::Finite(0)
        );
        assert_eq!(
            s(1, 1).mul(&x1()).mul(&d1().pow(2)).operator_norm(),
            Valuation::Finite(1)
        );
    }

    #[test]
    fn symbol_examples() {
        let p = x1().mul(&d1().pow(2)).add(&d1()).add(&x1());
        assert_eq!(p.symbol().unwrap().to_string(), "x1*xi1^2");
        let q = s(1, 0).sub(&s(1, 1).mul(&d1()));
        assert_eq!(q.symbol().unwrap().to_string(), "-t*xi1");
        let r = WeylOperator::d(2, 0, P).add(&WeylOperator::d(2, 1, P));
        assert_eq!(r.symbol().unwrap().to_string(), "xi1 + xi2");
        assert_eq!(
            WeylOperator::zero(1, P).symbol().unwrap_err(),
            WeylError::InexactZero
        );
    }

    #[test]
    fn invert_examples() {
        let p4 = 4;
        let u = WeylOperator::one(1, p4).sub(
            &WeylOperator::scalar(1, &LaurentScalar::t_pow(1, p4), p4)
                .mul(&WeylOperator::d(1, 0, p4)),
        );
        let inv = u.invert_unit().unwrap();
        assert_eq!(inv.to_string(), "t^3*d1^3 + t^2*d1^2 + t*d1 + 1");
        assert_eq!(d1().invert_unit().unwrap_err(), WeylError::NotAUnit);
        assert_eq!(
            s(1, 0).sub(&x1().mul(&d1())).invert_unit().unwrap_err(),
            WeylError::NotAUnit
        );
        assert_eq!(s(1, 1).invert_unit().unwrap(), s(1, -1));
    }

    #[test]
    fn display_normal_form() {
        let p = d1().pow(2).mul(&x1());
        assert_eq!(p.to_string(), "x1*d1^2 + 2*d1");
    }

    fn arb_weyl(vars: usize) -> impl Strategy<Value = WeylOperator> {
        prop::collection::vec((prop::collection::vec(0u32..3, vars), arb_tate(vars)), 1..4)
            .prop_map(move |ts| {
                WeylOperator::from_terms(vars, P, ts.into_iter().map(|(a, f)| (Monomial(a), f)))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transpose_is_involutive_antihomomorphism(p in arb_weyl(2), q in arb_weyl(2)) {
            prop_assert_eq!(p.transpose().transpose(), p.clone());
            prop_assert_eq!(p.mul(&q).transpose(), q.transpose().mul(&p.transpose()));
        }

        #[test]
        fn product_is_composition(p in arb_weyl(2), q in arb_weyl(2), f in arb_tate(2)) {
            prop_assert_eq!(p.mul(&q).apply(&f), p.apply(&q.apply(&f)));
        }

        #[test]
        fn norm_is_multiplicative(p in arb_weyl(2), q in arb_weyl(2)) {
            prop_assume!(!p.is_zero() && !q.is_zero());
            let n = |r: &WeylOperator| r.operator_norm().finite().unwrap();
            prop_assert_eq!(n(&p.mul(&q)), n(&p) + n(&q));
        }

        #[test]
        fn symbol_is_multiplicative(p in arb_weyl(2), q in arb_weyl(2)) {
            prop_assume!(!p.is_zero() && !q.is_zero());
            let pq = p.mul(&q).symbol().unwrap();
            prop_assert_eq!(pq, p.symbol().unwrap().mul(&q.symbol().unwrap()));
        }
    }
}
