use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

/// Exponent vector, ordered by degree reverse lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(vars: usize) -> Self {
        Monomial(vec![0; vars])
    }

    pub fn var(vars: usize, i: usize) -> Self {
        let mut e = vec![0; vars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `other / self`, assuming `self` divides `other`.
    pub fn quotient_of(&self, other: &Monomial) -> Monomial {
        Monomial(other.0.iter().zip(&self.0).map(|(a, b)| a - b).collect())
    }

    pub fn lcm(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| *a.max(b))
                .collect(),
        )
    }

    /// All monomials `γ ≤ self` componentwise.
    pub fn divisors(&self) -> Vec<Monomial> {
        let mut out = vec![Vec::with_capacity(self.0.len())];
        for &e in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=e).map(move |k| {
                        let mut p = prefix.clone();
                        p.push(k);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(Monomial).collect()
    }

    /// All monomials in `vars` variables of total degree at most `d`, in degrevlex order.
    pub fn up_to_degree(vars: usize, d: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        for deg in 0..=d {
            exact_degree(vars, deg, &mut Vec::new(), &mut out);
        }
        out.sort();
        out
    }
}

fn exact_degree(vars: usize, deg: u32, prefix: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if prefix.len() + 1 == vars {
        prefix.push(deg);
        out.push(Monomial(prefix.clone()));
        prefix.pop();
        return;
    }
    if vars == 0 {
        if deg == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    for k in 0..=deg {
        prefix.push(k);
        exact_degree(vars, deg - k, prefix, out);
        prefix.pop();
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            for (a, b) in self.0.iter().zip(&other.0).rev() {
                if a != b {
                    // the larger monomial has the smaller trailing exponent
                    return b.cmp(a);
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multinomial coefficient `∏ binom(α_i, γ_i)`.
pub fn binomial(alpha: &Monomial, gamma: &Monomial) -> u64 {
    alpha
        .0
        .iter()
        .zip(&gamma.0)
        .map(|(&a, &g)| binom(a as u64, g as u64))
        .product()
}

pub(crate) fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Writes `x1^2*x3` style products; `sym` is the variable stem.
pub(crate) fn fmt_monomial(f: &mut fmt::Formatter<'_>, m: &Monomial, sym: &str) -> fmt::Result {
    let mut first = true;
    for (i, &e) in m.0.iter().enumerate() {
        if e == 0 {
            continue;
        }
        if !first {
            write!(f, "*")?;
        }
        first = false;
        if e == 1 {
            write!(f, "{sym}{}", i + 1)?;
        } else {
            write!(f, "{sym}{}^{e}", i + 1)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degrevlex() {
        let m = |v: &[u32]| Monomial(v.to_vec());
        assert!(m(&[2, 0]) > m(&[0, 1]));
        assert!(m(&[1, 0, 1]) < m(&[0, 2, 0]));
        assert!(m(&[2, 0, 0]) > m(&[1, 1, 0]));
        assert!(m(&[1, 1, 0]) > m(&[0, 2, 0]));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(Monomial::up_to_degree(2, 3).len(), 10);
        assert_eq!(Monomial::up_to_degree(1, 5).len(), 6);
        assert_eq!(Monomial::up_to_degree(0, 5).len(), 1);
        assert_eq!(Monomial(vec![2, 1]).divisors().len(), 6);
        assert_eq!(binomial(&Monomial(vec![4, 2]), &Monomial(vec![2, 1])), 12);
    }
}
