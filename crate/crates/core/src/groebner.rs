use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::monomial::{binom, fmt_monomial, Monomial};
use crate::ratfunc::RatFunc;
use crate::scalars::{rat, LaurentScalar, Rational};
use crate::tate::TateElement;
use crate::weyl::WeylOperator;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroebnerError {
    #[error("coefficient is not a Laurent polynomial in t at this precision")]
    UnsupportedCoefficients,
}

/// Monomial `x^x ∂^d` (or `x^x ξ^d` in the commutative graded ring).
///
/// Ordered by total `∂`-degree, then degree reverse lexicographically on
/// the joint exponent vector `(x, ∂)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeylKey {
    pub x: Monomial,
    pub d: Monomial,
}

impl WeylKey {
    pub fn one(vars: usize) -> Self {
        WeylKey {
            x: Monomial::one(vars),
            d: Monomial::one(vars),
        }
    }

    pub fn vars(&self) -> usize {
        self.x.vars()
    }

    fn joint(&self) -> Monomial {
        Monomial(self.x.0.iter().chain(&self.d.0).copied().collect())
    }

    pub fn is_one(&self) -> bool {
        self.x.is_one() && self.d.is_one()
    }

    pub fn divides(&self, other: &Self) -> bool {
        self.x.divides(&other.x) && self.d.divides(&other.d)
    }

    pub fn quotient_of(&self, other: &Self) -> Self {
        WeylKey {
            x: self.x.quotient_of(&other.x),
            d: self.d.quotient_of(&other.d),
        }
    }

    pub fn lcm(&self, other: &Self) -> Self {
        WeylKey {
            x: self.x.lcm(&other.x),
            d: self.d.lcm(&other.d),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        WeylKey {
            x: self.x.mul(&other.x),
            d: self.d.mul(&other.d),
        }
    }

    /// Indices into the joint `(x, ∂)` variable list that occur.
    fn support(&self) -> Vec<usize> {
        self.joint()
            .0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, _)| i)
            .collect()
    }
}

impl Ord for WeylKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d
            .degree()
            .cmp(&other.d.degree())
            .then_with(|| self.joint().cmp(&other.joint()))
    }
}

impl PartialOrd for WeylKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Polynomial `Σ c x^a ∂^b` with exact coefficients in ℚ(t).
///
/// The same container holds Weyl algebra elements and commutative
/// polynomials in `(x, ξ)`; the product used is chosen by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactPoly {
    vars: usize,
    terms: BTreeMap<WeylKey, RatFunc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algebra {
    Weyl,
    Commutative,
}

impl ExactPoly {
    pub fn zero(vars: usize) -> Self {
        ExactPoly {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: usize, c: RatFunc) -> Self {
        Self::term(WeylKey::one(vars), c)
    }

    pub fn one(vars: usize) -> Self {
        Self::constant(vars, RatFunc::one())
    }

    pub fn term(key: WeylKey, c: RatFunc) -> Self {
        let mut p = Self::zero(key.vars());
        p.add_term(key, &c);
        p
    }

    /// `x_i` (0-based).
    pub fn x(vars: usize, i: usize) -> Self {
        Self::term(
            WeylKey {
                x: Monomial::var(vars, i),
                d: Monomial::one(vars),
            },
            RatFunc::one(),
        )
    }

    /// `∂_i` (0-based).
    pub fn d(vars: usize, i: usize) -> Self {
        Self::term(
            WeylKey {
                x: Monomial::one(vars),
                d: Monomial::var(vars, i),
            },
            RatFunc::one(),
        )
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&WeylKey, &RatFunc)> {
        self.terms.iter().rev()
    }

    pub fn coefficient(&self, k: &WeylKey) -> RatFunc {
        self.terms.get(k).cloned().unwrap_or_else(RatFunc::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.len() == 1 && self.terms.keys().next().unwrap().is_one()
    }

    pub fn leading(&self) -> Option<(&WeylKey, &RatFunc)> {
        self.terms.iter().next_back()
    }

    /// Largest total `∂`-degree.
    pub fn order(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.d.degree()).max()
    }

    fn add_term(&mut self, k: WeylKey, c: &RatFunc) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&k) {
            Some(slot) => {
                *slot = slot.add(c);
                if slot.is_zero() {
                    self.terms.remove(&k);
                }
            }
            None => {
                self.terms.insert(k, c.clone());
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c);
        }
        out
    }

    pub fn neg(&self) -> Self {
        ExactPoly {
            vars: self.vars,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &RatFunc) -> Self {
        if c.is_zero() {
            return Self::zero(self.vars);
        }
        ExactPoly {
            vars: self.vars,
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), v.mul(c)))
                .collect(),
        }
    }

    pub fn monic(&self) -> Self {
        match self.leading() {
            Some((_, c)) => self.scale(&c.inv().unwrap()),
            None => self.clone(),
        }
    }

    /// `c · m · self` in the chosen algebra.
    pub fn left_mul_term(&self, alg: Algebra, m: &WeylKey, c: &RatFunc) -> Self {
        let mut out = Self::zero(self.vars);
        for (k, v) in &self.terms {
            let coeff = c.mul(v);
            match alg {
                Algebra::Commutative => out.add_term(m.mul(k), &coeff),
                Algebra::Weyl => {
                    for (key, n) in weyl_monomial_product(m, k) {
                        out.add_term(key, &coeff.scale(&n));
                    }
                }
            }
        }
        out
    }

    pub fn mul(&self, alg: Algebra, other: &Self) -> Self {
        self.terms
            .iter()
            .fold(Self::zero(self.vars), |acc, (k, c)| {
                acc.add(&other.left_mul_term(alg, k, c))
            })
    }

    pub fn weyl_mul(&self, other: &Self) -> Self {
        self.mul(Algebra::Weyl, other)
    }

    pub fn pow(&self, alg: Algebra, k: u32) -> Self {
        (0..k).fold(Self::one(self.vars), |acc, _| acc.mul(alg, self))
    }

    /// Top `∂`-degree part, read as a commutative polynomial in `(x, ξ)`.
    pub fn symbol(&self) -> Self {
        let Some(top) = self.order() else {
            return self.clone();
        };
        ExactPoly {
            vars: self.vars,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.d.degree() == top)
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect(),
        }
    }

    /// Formal adjoint `Σ (-1)^|b| ∂^b c x^a`.
    pub fn transpose(&self) -> Self {
        let mut out = Self::zero(self.vars);
        for (k, c) in &self.terms {
            let sign = if k.d.degree() % 2 == 0 { 1 } else { -1 };
            let d = WeylKey {
                x: Monomial::one(self.vars),
                d: k.d.clone(),
            };
            let x = WeylKey {
                x: k.x.clone(),
                d: Monomial::one(self.vars),
            };
            for (key, n) in weyl_monomial_product(&d, &x) {
                out.add_term(key, &c.scale(&(n * rat(sign))));
            }
        }
        out
    }

    /// Truncated expansion at relative precision `prec`.
    pub fn to_operator(&self, prec: usize) -> WeylOperator {
        let mut by_d: BTreeMap<Monomial, Vec<(Monomial, LaurentScalar)>> = BTreeMap::new();
        for (k, c) in &self.terms {
            by_d.entry(k.d.clone())
                .or_default()
                .push((k.x.clone(), c.to_laurent(prec)));
        }
        WeylOperator::from_terms(
            self.vars,
            prec,
            by_d.into_iter()
                .map(|(d, xs)| (d, TateElement::from_terms(self.vars, xs))),
        )
    }

    /// Reads a truncated operator back as an exact one, rejecting
    /// coefficients whose last carried t-digit is nonzero.
    pub fn from_operator(op: &WeylOperator) -> Result<Self, GroebnerError> {
        let vars = op.vars();
        let mut out = Self::zero(vars);
        for (d, f) in op.terms() {
            for (x, c) in f.terms() {
                let digits = c.unit_coefficients();
                if digits.len() >= op.precision()
                    && digits
                        .last()
                        .is_some_and(|q| *q != Rational::from_integer(0.into()))
                {
                    return Err(GroebnerError::UnsupportedCoefficients);
                }
                let r = c.terms().into_iter().fold(RatFunc::zero(), |acc, (k, q)| {
                    acc.add(&RatFunc::t_pow(k).scale(&q))
                });
                out.add_term(
                    WeylKey {
                        x: x.clone(),
                        d: d.clone(),
                    },
                    &r,
                );
            }
        }
        Ok(out)
    }

    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, d_stem: &str) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms().enumerate() {
            let (neg, body) = match c.as_monomial() {
                Some((_, q)) if q < Rational::from_integer(0.into()) => (true, c.neg()),
                _ => (false, c.clone()),
            };
            match (i == 0, neg) {
                (true, true) => write!(f, "-")?,
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
                _ => {}
            }
            let mut need_star = false;
            if !(body.is_one() && !k.is_one()) {
                write!(f, "{}", body.fmt_factor())?;
                need_star = true;
            }
            for (m, stem) in [(&k.x, "x"), (&k.d, d_stem)] {
                if !m.is_one() {
                    if need_star {
                        write!(f, "*")?;
                    }
                    fmt_monomial(f, m, stem)?;
                    need_star = true;
                }
            }
        }
        Ok(())
    }

    /// Display with `ξ` written `xi`, for graded-ring elements.
    pub fn to_symbol_string(&self) -> String {
        struct S<'a>(&'a ExactPoly);
        impl fmt::Display for S<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt_with(f, "xi")
            }
        }
        S(self).to_string()
    }
}

impl fmt::Display for ExactPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, "d")
    }
}

/// `x^a ∂^b · x^c ∂^e = Σ_γ Π binom(b,γ) c!/(c-γ)! x^(a+c-γ) ∂^(b+e-γ)`.
fn weyl_monomial_product(m: &WeylKey, k: &WeylKey) -> Vec<(WeylKey, Rational)> {
    let vars = m.vars();
    let gammas = Monomial(m.d.0.iter().zip(&k.x.0).map(|(b, c)| *b.min(c)).collect()).divisors();
    gammas
        .into_iter()
        .map(|g| {
            let mut n = Rational::from_integer(1.into());
            let mut x = Vec::with_capacity(vars);
            let mut d = Vec::with_capacity(vars);
            for i in 0..vars {
                let (b, c, gi) = (m.d.0[i], k.x.0[i], g.0[i]);
                n *= rat(binom(b as u64, gi as u64) as i64);
                for j in 0..gi {
                    n *= rat((c - j) as i64);
                }
                x.push(m.x.0[i] + c - gi);
                d.push(b - gi + k.d.0[i]);
            }
            (
                WeylKey {
                    x: Monomial(x),
                    d: Monomial(d),
                },
                n,
            )
        })
        .collect()
}

/// Normal form of `f` modulo the left ideal with Gröbner basis `basis`.
pub fn reduce(alg: Algebra, f: &ExactPoly, basis: &[ExactPoly]) -> ExactPoly {
    let mut rem = ExactPoly::zero(f.vars);
    let mut p = f.clone();
    while let Some((lk, lc)) = p.leading().map(|(k, c)| (k.clone(), c.clone())) {
        match basis
            .iter()
            .find(|g| g.leading().is_some_and(|(gk, _)| gk.divides(&lk)))
        {
            Some(g) => {
                let (gk, gc) = g.leading().unwrap();
                let m = gk.quotient_of(&lk);
                let c = lc.div(gc).unwrap();
                p = p.sub(&g.left_mul_term(alg, &m, &c));
            }
            None => {
                p.terms.remove(&lk);
                rem.add_term(lk, &lc);
            }
        }
    }
    rem
}

/// Reduced left Gröbner basis of the ideal generated by `rels`.
pub fn buchberger(alg: Algebra, rels: &[ExactPoly]) -> Vec<ExactPoly> {
    let mut basis: Vec<ExactPoly> = Vec::new();
    for r in rels {
        let nf = reduce(alg, r, &basis);
        if !nf.is_zero() {
            basis.push(nf.monic());
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..basis.len())
        .flat_map(|j| (0..j).map(move |i| (i, j)))
        .collect();
    while let Some((i, j)) = pairs.pop() {
        let (ki, _) = basis[i].leading().unwrap();
        let (kj, _) = basis[j].leading().unwrap();
        if alg == Algebra::Commutative && ki.lcm(kj) == ki.mul(kj) {
            continue;
        }
        let l = ki.lcm(kj);
        let one = RatFunc::one();
        let s = basis[i]
            .left_mul_term(alg, &ki.quotient_of(&l), &one)
            .sub(&basis[j].left_mul_term(alg, &kj.quotient_of(&l), &one));
        let nf = reduce(alg, &s, &basis);
        if nf.is_zero() {
            continue;
        }
        if nf.is_constant() {
            return vec![ExactPoly::one(nf.vars)];
        }
        let n = basis.len();
        basis.push(nf.monic());
        pairs.extend((0..n).map(|i| (i, n)));
    }
    interreduce(alg, basis)
}

fn interreduce(alg: Algebra, basis: Vec<ExactPoly>) -> Vec<ExactPoly> {
    let mut minimal: Vec<ExactPoly> = Vec::new();
    for (i, g) in basis.iter().enumerate() {
        let (gk, _) = g.leading().unwrap();
        let redundant = basis.iter().enumerate().any(|(j, h)| {
            let (hk, _) = h.leading().unwrap();
            j != i && hk.divides(gk) && (hk != gk || j < i)
        });
        if !redundant {
            minimal.push(g.clone());
        }
    }
    let mut out: Vec<ExactPoly> = (0..minimal.len())
        .map(|i| {
            let others: Vec<ExactPoly> = minimal
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, g)| g.clone())
                .collect();
            let lead = ExactPoly::term(minimal[i].leading().unwrap().0.clone(), RatFunc::one());
            let tail = minimal[i].sub(&lead);
            lead.add(&reduce(alg, &tail, &others)).monic()
        })
        .collect();
    out.sort_by(|a, b| a.leading().unwrap().0.cmp(b.leading().unwrap().0));
    out
}

/// Left Gröbner basis in the Weyl algebra.
pub fn left_buchberger(rels: &[ExactPoly]) -> Vec<ExactPoly> {
    buchberger(Algebra::Weyl, rels)
}

/// Symbols of a Gröbner basis, generating the graded ideal.
pub fn initial_ideal(basis: &[ExactPoly]) -> Vec<ExactPoly> {
    basis.iter().map(|g| g.symbol().monic()).collect()
}

/// Krull dimension of `k(t)[x, ξ] / ideal`; `None` if the ideal is the unit ideal.
pub fn krull_dimension(ideal: &[ExactPoly], vars: usize) -> Option<usize> {
    let gb = buchberger(Algebra::Commutative, ideal);
    if gb.iter().any(ExactPoly::is_constant) {
        return None;
    }
    let supports: Vec<Vec<usize>> = gb
        .iter()
        .map(|g| g.leading().unwrap().0.support())
        .collect();
    let nv = 2 * vars;
    (0u32..(1 << nv))
        .filter(|set| {
            supports
                .iter()
                .all(|s| !s.iter().all(|i| set & (1 << i) != 0))
        })
        .map(|set| set.count_ones() as usize)
        .max()
}

/// Monomials of the joint `(x, ∂)` lattice outside the leading ideal of `basis`,
/// with x-degree at most `x_deg` and ∂-degree at most `d_deg`.
pub fn standard_monomials(
    basis: &[ExactPoly],
    vars: usize,
    x_deg: u32,
    d_deg: u32,
) -> Vec<WeylKey> {
    let leads: Vec<&WeylKey> = basis
        .iter()
        .filter_map(|g| g.leading().map(|(k, _)| k))
        .collect();
    let mut out = Vec::new();
    for d in Monomial::up_to_degree(vars, d_deg) {
        for x in Monomial::up_to_degree(vars, x_deg) {
            let k = WeylKey { x, d: d.clone() };
            if !leads.iter().any(|l| l.divides(&k)) {
                out.push(k);
            }
        }
    }
    out
}

/// Finite direct sum of cyclic modules `𝒟ₙ / I_j` with exact relations.
#[derive(Debug, Clone)]
pub struct FilteredPresentation {
    pub vars: usize,
    pub summands: Vec<Vec<ExactPoly>>,
}

impl FilteredPresentation {
    pub fn cyclic(vars: usize, relations: Vec<ExactPoly>) -> Self {
        FilteredPresentation {
            vars,
            summands: vec![relations],
        }
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars);
        let mut summands = self.summands.clone();
        summands.extend(other.summands.iter().cloned());
        FilteredPresentation {
            vars: self.vars,
            summands,
        }
    }

    /// Each relation multiplied on the left by the matching scalar.
    pub fn rescaled(&self, scalars: &[RatFunc]) -> Self {
        let mut it = scalars.iter().cycle();
        FilteredPresentation {
            vars: self.vars,
            summands: self
                .summands
                .iter()
                .map(|rels| rels.iter().map(|r| r.scale(it.next().unwrap())).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct CharVarietyReport {
    pub initial_ideal_generators: Vec<String>,
    /// `None` for the zero module.
    pub char_dimension: Option<usize>,
    pub holonomic: bool,
}

/// Gröbner basis, symbols and dimension count for each summand; the
/// characteristic variety of a direct sum is the union of the summands'.
pub fn is_holonomic(p: &FilteredPresentation) -> CharVarietyReport {
    let mut gens = Vec::new();
    let mut dim: Option<usize> = None;
    for rels in &p.summands {
        let gb = left_buchberger(rels);
        let init = initial_ideal(&gb);
        gens.extend(init.iter().map(ExactPoly::to_symbol_string));
        if let Some(d) = krull_dimension(&init, p.vars) {
            dim = Some(dim.map_or(d, |e| e.max(d)));
        }
    }
    CharVarietyReport {
        initial_ideal_generators: gens,
        char_dimension: dim,
        holonomic: dim.is_none_or(|d| d == p.vars),
    }
}

/// Laurent polynomial `Σ q t^k` as an exact coefficient.
pub fn laurent(terms: &[(i64, i64)]) -> RatFunc {
    terms.iter().fold(RatFunc::zero(), |acc, &(k, q)| {
        acc.add(&RatFunc::t_pow(k).scale(&rat(q)))
    })
}
