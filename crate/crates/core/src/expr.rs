//! Operator expressions: `expr := term (("+"|"-") term)*`,
//! `term := factor ("*" factor)*`, `factor := atom ("^" int)?`,
//! `atom := rational | "t" | "x"nat | "d"nat | "(" expr ")"`.
//!
//! A leading `-` negates a term. Negative exponents are only accepted on
//! subexpressions free of `x` and `d`.

use thiserror::Error;

use crate::groebner::ExactPoly;
use crate::monomial::Monomial;
use crate::ratfunc::RatFunc;
use crate::scalars::Rational;
use crate::tate::TateElement;
use crate::weyl::WeylOperator;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    SyntaxError { position: usize, message: String },
    #[error("variable index {index} outside 1..={vars}")]
    IndexOutOfRange { index: usize, vars: usize },
    #[error("inverse of a zero scalar")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Rational(Rational),
    T,
    /// Zero-based variable index.
    X(usize),
    D(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
}

impl Expr {
    /// No `x` or `d` occurs.
    pub fn is_scalar(&self) -> bool {
        match self {
            Expr::Rational(_) | Expr::T => true,
            Expr::X(_) | Expr::D(_) => false,
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_scalar(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.is_scalar() && b.is_scalar(),
        }
    }

    fn scalar_value(&self) -> Result<RatFunc, ExprError> {
        Ok(match self {
            Expr::Rational(q) => RatFunc::from_rational(q.clone()),
            Expr::T => RatFunc::t_pow(1),
            Expr::Neg(a) => a.scalar_value()?.neg(),
            Expr::Add(a, b) => a.scalar_value()?.add(&b.scalar_value()?),
            Expr::Sub(a, b) => a.scalar_value()?.sub(&b.scalar_value()?),
            Expr::Mul(a, b) => a.scalar_value()?.mul(&b.scalar_value()?),
            Expr::Pow(a, k) => a.scalar_value()?.pow(*k).ok_or(ExprError::DivisionByZero)?,
            Expr::X(_) | Expr::D(_) => unreachable!("checked by is_scalar"),
        })
    }

    /// Exact value in the Weyl algebra over `ℚ(t)`.
    pub fn to_exact(&self, vars: usize) -> Result<ExactPoly, ExprError> {
        if self.is_scalar() {
            return Ok(ExactPoly::constant(vars, self.scalar_value()?));
        }
        Ok(match self {
            Expr::X(i) => ExactPoly::x(vars, *i),
            Expr::D(i) => ExactPoly::d(vars, *i),
            Expr::Neg(a) => a.to_exact(vars)?.neg(),
            Expr::Add(a, b) => a.to_exact(vars)?.add(&b.to_exact(vars)?),
            Expr::Sub(a, b) => a.to_exact(vars)?.sub(&b.to_exact(vars)?),
            Expr::Mul(a, b) => a.to_exact(vars)?.weyl_mul(&b.to_exact(vars)?),
            Expr::Pow(a, k) => {
                let base = a.to_exact(vars)?;
                (0..*k).fold(ExactPoly::one(vars), |acc, _| acc.weyl_mul(&base))
            }
            Expr::Rational(_) | Expr::T => unreachable!("scalars handled above"),
        })
    }

    pub fn has_d(&self) -> bool {
        match self {
            Expr::Rational(_) | Expr::T | Expr::X(_) => false,
            Expr::D(_) => true,
            Expr::Neg(a) | Expr::Pow(a, _) => a.has_d(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.has_d() || b.has_d(),
        }
    }

    /// Largest one-based variable index that occurs.
    pub fn max_index(&self) -> usize {
        match self {
            Expr::Rational(_) | Expr::T => 0,
            Expr::X(i) | Expr::D(i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.max_index().max(b.max_index()),
        }
    }

    /// Normal form at relative precision `prec`.
    pub fn to_operator(&self, vars: usize, prec: usize) -> Result<WeylOperator, ExprError> {
        Ok(self.to_exact(vars)?.to_operator(prec))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: usize,
}

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::SyntaxError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> Result<u64, ExprError> {
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected digits");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse().or_else(|_| {
            self.pos = start;
            self.err("number too large")
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut acc = if self.eat(b'-') {
            Expr::Neg(Box::new(self.term()?))
        } else {
            self.term()?
        };
        loop {
            if self.eat(b'+') {
                acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat(b'-') {
                acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.factor()?;
        while self.eat(b'*') {
            acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let at = self.pos;
        let neg = self.eat(b'-');
        self.skip_ws();
        let k = self.digits()? as i64;
        if neg && !base.is_scalar() {
            self.pos = at;
            return self.err("negative exponent on an expression involving x or d");
        }
        Ok(Expr::Pow(Box::new(base), if neg { -k } else { k }))
    }

    fn index(&mut self) -> Result<usize, ExprError> {
        let i = self.digits()? as usize;
        if i == 0 || i > self.vars {
            return Err(ExprError::IndexOutOfRange {
                index: i,
                vars: self.vars,
            });
        }
        Ok(i - 1)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(b't') => {
                self.pos += 1;
                Ok(Expr::T)
            }
            Some(b'x') => {
                self.pos += 1;
                Ok(Expr::X(self.index()?))
            }
            Some(b'd') => {
                self.pos += 1;
                Ok(Expr::D(self.index()?))
            }
            Some(c) if c.is_ascii_digit() => {
                let num = self.digits()?;
                let den = if self.eat(b'/') {
                    self.skip_ws();
                    let at = self.pos;
                    let d = self.digits()?;
                    if d == 0 {
                        self.pos = at;
                        return self.err("zero denominator");
                    }
                    d
                } else {
                    1
                };
                Ok(Expr::Rational(Rational::new(num.into(), den.into())))
            }
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of input"),
        }
    }
}

pub fn parse_operator(src: &str, vars: usize) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        vars,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// A function in the Tate algebra, written without `d`.
pub fn parse_tate(src: &str, vars: usize, prec: usize) -> Result<TateElement, ExprError> {
    let e = parse_operator(src, vars)?;
    if e.has_d() {
        return Err(ExprError::SyntaxError {
            position: 0,
            message: "functions cannot involve d".into(),
        });
    }
    Ok(e.to_operator(vars, prec)?.coefficient(&Monomial::one(vars)))
}
