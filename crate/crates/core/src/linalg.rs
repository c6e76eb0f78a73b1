//! Linear algebra over `K` with valuation pivoting.
//!
//! Entries whose valuation reaches the matrix's precision floor are never
//! chosen as pivots; if such an entry is an inexact zero whose bound lies below
//! the floor, the rank decision rests on unseen digits and the report is marked
//! unreliable.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::scalars::{LaurentScalar, Valuation};

#[derive(Debug, Clone)]
pub struct ScalarMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<LaurentScalar>,
    precision_floor: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    /// Valuation of the smallest pivot used (the largest pivot valuation).
    pub min_pivot_valuation: Option<i64>,
    pub reliable: bool,
}

impl ScalarMatrix {
    pub fn zeros(rows: usize, cols: usize, precision_floor: i64) -> Self {
        ScalarMatrix {
            rows,
            cols,
            entries: vec![LaurentScalar::zero(); rows * cols],
            precision_floor,
        }
    }

    pub fn from_rows(rows: Vec<Vec<LaurentScalar>>, precision_floor: i64) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        ScalarMatrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
            precision_floor,
        }
    }

    pub fn identity(n: usize, prec: usize, precision_floor: i64) -> Self {
        let mut m = Self::zeros(n, n, precision_floor);
        for i in 0..n {
            m.set(i, i, LaurentScalar::one(prec));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn precision_floor(&self) -> i64 {
        self.precision_floor
    }

    pub fn get(&self, r: usize, c: usize) -> &LaurentScalar {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: LaurentScalar) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn mul_vector(&self, v: &[LaurentScalar]) -> Vec<LaurentScalar> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                (0..self.cols).fold(LaurentScalar::zero(), |acc, c| {
                    acc.add(&self.get(r, c).mul(&v[c]))
                })
            })
            .collect()
    }

    pub fn mul(&self, other: &ScalarMatrix) -> ScalarMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = ScalarMatrix::zeros(
            self.rows,
            other.cols,
            self.precision_floor.min(other.precision_floor),
        );
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_exact_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let b = other.get(k, c);
                    if !b.is_exact_zero() {
                        let v = out.get(r, c).add(&a.mul(b));
                        out.set(r, c, v);
                    }
                }
            }
        }
        out
    }

    /// True when every entry is zero at precision or lies at or beyond the floor.
    pub fn is_negligible(&self) -> bool {
        self.entries
            .iter()
            .all(|e| is_negligible(e, self.precision_floor))
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let mut s = SparseMatrix::new(self.rows, self.cols, self.precision_floor);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let e = self.get(r, c);
                if !e.is_exact_zero() {
                    s.data[r].insert(c, e.clone());
                }
            }
        }
        s
    }

    /// Row echelon form under minimal-valuation pivoting.
    pub fn echelonize(&self) -> (ScalarMatrix, RankReport) {
        let mut s = self.to_sparse();
        let elim = s.eliminate(false);
        let report = elim.report(self.rows, self.cols);
        let mut order: Vec<usize> = elim.pivots.iter().map(|p| p.0).collect();
        let pivot_rows: std::collections::BTreeSet<usize> = order.iter().copied().collect();
        order.extend((0..self.rows).filter(|r| !pivot_rows.contains(r)));
        let mut out = ScalarMatrix::zeros(self.rows, self.cols, self.precision_floor);
        for (i, r) in order.into_iter().enumerate() {
            for (c, v) in &s.data[r] {
                out.set(i, *c, v.clone());
            }
        }
        (out, report)
    }

    pub fn rank_report(&self) -> RankReport {
        self.to_sparse().rank_report()
    }

    /// Vectors spanning the kernel at the working precision.
    pub fn kernel_basis(&self) -> Vec<Vec<LaurentScalar>> {
        self.to_sparse().kernel_basis()
    }

    pub fn cokernel_dim(&self) -> (usize, RankReport) {
        let rep = self.rank_report();
        (rep.cokernel_dim, rep)
    }
}

pub(crate) fn is_negligible(e: &LaurentScalar, floor: i64) -> bool {
    match e.valuation() {
        Valuation::Infinite => true,
        Valuation::AtLeast(_) => true,
        Valuation::Finite(v) => v >= floor,
    }
}

/// Row-sparse matrix used for the larger de Rham windows.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<BTreeMap<usize, LaurentScalar>>,
    pub precision_floor: i64,
}

struct Elimination {
    /// `(row, col)` of each pivot in the order chosen.
    pivots: Vec<(usize, usize)>,
    min_pivot_valuation: Option<i64>,
    reliable: bool,
}

impl Elimination {
    fn report(&self, rows: usize, cols: usize) -> RankReport {
        let rank = self.pivots.len();
        RankReport {
            rank,
            kernel_dim: cols - rank,
            cokernel_dim: rows - rank,
            min_pivot_valuation: self.min_pivot_valuation,
            reliable: self.reliable,
        }
    }
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize, precision_floor: i64) -> Self {
        SparseMatrix {
            rows,
            cols,
            data: vec![BTreeMap::new(); rows],
            precision_floor,
        }
    }

    /// Builds a matrix from sparse columns `(row, value)`.
    pub fn from_columns(rows: usize, columns: &[Vec<(usize, LaurentScalar)>], floor: i64) -> Self {
        let mut m = SparseMatrix::new(rows, columns.len(), floor);
        for (c, col) in columns.iter().enumerate() {
            for (r, v) in col {
                m.add_to(*r, c, v);
            }
        }
        m
    }

    pub fn add_to(&mut self, r: usize, c: usize, v: &LaurentScalar) {
        if v.is_exact_zero() {
            return;
        }
        let slot = self.data[r].entry(c).or_insert_with(LaurentScalar::zero);
        *slot = slot.add(v);
        if slot.is_exact_zero() {
            self.data[r].remove(&c);
        }
    }

    pub fn get(&self, r: usize, c: usize) -> LaurentScalar {
        self.data[r]
            .get(&c)
            .cloned()
            .unwrap_or_else(LaurentScalar::zero)
    }

    pub fn to_dense(&self) -> ScalarMatrix {
        let mut m = ScalarMatrix::zeros(self.rows, self.cols, self.precision_floor);
        for (r, row) in self.data.iter().enumerate() {
            for (c, v) in row {
                m.set(r, *c, v.clone());
            }
        }
        m
    }

    /// Smallest valuation among entries, if any entry is nonzero.
    pub fn min_valuation(&self) -> Option<i64> {
        self.data
            .iter()
            .flat_map(|r| r.values())
            .filter_map(|v| v.valuation().finite())
            .min()
    }

    /// Multiplies every entry by `t^k`.
    pub fn shift(&mut self, k: i64) {
        for row in &mut self.data {
            for v in row.values_mut() {
                *v = v.shift(k);
            }
        }
    }

    pub fn rank_report(&self) -> RankReport {
        let mut work = self.clone();
        let e = work.eliminate(false);
        e.report(self.rows, self.cols)
    }

    pub fn kernel_basis(&self) -> Vec<Vec<LaurentScalar>> {
        let mut work = self.clone();
        let e = work.eliminate(true);
        let pivot_cols: BTreeMap<usize, usize> = e.pivots.iter().map(|&(r, c)| (c, r)).collect();
        (0..self.cols)
            .filter(|c| !pivot_cols.contains_key(c))
            .map(|free| {
                let mut v = vec![LaurentScalar::zero(); self.cols];
                v[free] = LaurentScalar::one(unit_precision(self));
                for (&pc, &pr) in &pivot_cols {
                    let a = work.get(pr, free);
                    if a.is_exact_zero() {
                        continue;
                    }
                    let piv = work.get(pr, pc);
                    v[pc] = a.div(&piv).expect("pivot is a unit").neg();
                }
                v
            })
            .collect()
    }

    pub fn mul_vector(&self, v: &[LaurentScalar]) -> Vec<LaurentScalar> {
        self.data
            .iter()
            .map(|row| {
                row.iter()
                    .fold(LaurentScalar::zero(), |acc, (c, a)| acc.add(&a.mul(&v[*c])))
            })
            .collect()
    }

    fn eliminate(&mut self, jordan: bool) -> Elimination {
        let floor = self.precision_floor;
        let mut active = vec![true; self.rows];
        let mut col_done = vec![false; self.cols];
        let mut pivots = Vec::new();
        let mut min_val: Option<i64> = None;
        loop {
            let mut col_count = vec![0usize; self.cols];
            for (r, row) in self.data.iter().enumerate() {
                if active[r] {
                    for c in row.keys() {
                        col_count[*c] += 1;
                    }
                }
            }
            // (valuation, markowitz cost, row, col)
            let mut best: Option<(i64, usize, usize, usize)> = None;
            for (r, row) in self.data.iter().enumerate() {
                if !active[r] {
                    continue;
                }
                let rn = row.len().saturating_sub(1);
                for (c, v) in row {
                    if col_done[*c] {
                        continue;
                    }
                    let Valuation::Finite(val) = v.valuation() else {
                        continue;
                    };
                    if val >= floor {
                        continue;
                    }
                    let key = (val, rn * (col_count[*c] - 1), r, *c);
                    if best.is_none_or(|b| key < b) {
                        best = Some(key);
                    }
                }
            }
            let Some((val, _, pr, pc)) = best else { break };
            min_val = Some(min_val.map_or(val, |m: i64| m.max(val)));
            active[pr] = false;
            col_done[pc] = true;
            pivots.push((pr, pc));
            let pivot_row = self.data[pr].clone();
            let piv_inv = pivot_row[&pc].invert().expect("pivot has finite valuation");
            for r in 0..self.rows {
                if r == pr || !(active[r] || jordan) {
                    continue;
                }
                let Some(a) = self.data[r].get(&pc).cloned() else {
                    continue;
                };
                let factor = a.mul(&piv_inv);
                let row = &mut self.data[r];
                row.remove(&pc);
                for (c, v) in &pivot_row {
                    if *c == pc {
                        continue;
                    }
                    let upd = factor.mul(v).neg();
                    let slot = row.entry(*c).or_insert_with(LaurentScalar::zero);
                    *slot = slot.add(&upd);
                    if slot.is_exact_zero() {
                        row.remove(c);
                    }
                }
            }
        }
        let reliable = self
            .data
            .iter()
            .enumerate()
            .filter(|(r, _)| active[*r])
            .all(|(_, row)| {
                row.iter()
                    .filter(|(c, _)| !col_done[**c])
                    .all(|(_, v)| match v.valuation() {
                        Valuation::AtLeast(b) => b >= floor,
                        _ => true,
                    })
            });
        Elimination {
            pivots,
            min_pivot_valuation: min_val,
            reliable,
        }
    }
}

fn unit_precision(m: &SparseMatrix) -> usize {
    m.data
        .iter()
        .flat_map(|r| r.values())
        .map(LaurentScalar::relative_precision)
        .max()
        .unwrap_or(1)
        .max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: i64) -> LaurentScalar {
        LaurentScalar::from_int(n, 8)
    }

    fn t(k: i64) -> LaurentScalar {
        LaurentScalar::t_pow(k, 8)
    }

    fn m(rows: Vec<Vec<LaurentScalar>>) -> ScalarMatrix {
        ScalarMatrix::from_rows(rows, 8)
    }

    #[test]
    fn identity_rank() {
        let r = ScalarMatrix::identity(2, 8, 8).rank_report();
        assert_eq!(
            (r.rank, r.kernel_dim, r.cokernel_dim, r.reliable),
            (2, 0, 0, true)
        );
    }

    #[test]
    fn rank_one() {
        let r = m(vec![vec![s(1), s(1)], vec![s(1), s(1)]]).rank_report();
        assert_eq!((r.rank, r.kernel_dim, r.cokernel_dim), (1, 1, 1));
    }

    #[test]
    fn diagonal_with_t() {
        let (ech, r) = m(vec![vec![t(1), s(0)], vec![s(0), s(1)]]).echelonize();
        assert_eq!(r.rank, 2);
        assert_eq!(r.min_pivot_valuation, Some(1));
        assert!(r.reliable);
        assert_eq!(ech.rows(), 2);
    }

    #[test]
    fn kernel_examples() {
        let k = m(vec![vec![s(0)]]).kernel_basis();
        assert_eq!(k.len(), 1);
        assert!(k[0][0].eq_at_precision(&s(1)));

        let k = m(vec![vec![s(1), s(-1)]]).kernel_basis();
        assert_eq!(k.len(), 1);
        assert!(k[0][0].eq_at_precision(&s(1)) && k[0][1].eq_at_precision(&s(1)));

        let mat = m(vec![vec![t(1), s(-1)]]);
        let k = mat.kernel_basis();
        assert_eq!(k.len(), 1);
        assert!(k[0][0].eq_at_precision(&s(1)));
        assert!(k[0][1].eq_at_precision(&t(1)));
        assert!(mat
            .mul_vector(&k[0])
            .iter()
            .all(LaurentScalar::is_zero_at_precision));
    }

    #[test]
    fn cokernel_examples() {
        assert_eq!(m(vec![vec![LaurentScalar::zero()]]).cokernel_dim().0, 1);
        assert_eq!(ScalarMatrix::identity(3, 8, 8).cokernel_dim().0, 0);
        assert_eq!(m(vec![vec![t(-1)]]).cokernel_dim().0, 0);
    }

    #[test]
    fn small_entries_are_not_pivots() {
        let r = m(vec![vec![t(9)]]).rank_report();
        assert_eq!(r.rank, 0);
        assert!(r.reliable);
        let r = m(vec![vec![LaurentScalar::zero_mod(3)]]).rank_report();
        assert_eq!(r.rank, 0);
        assert!(!r.reliable);
    }

    #[test]
    fn bidiagonal_small_invariant_factor() {
        // diag -t, superdiagonal 1..n: one invariant factor of valuation n
        let n = 10;
        let mut rows = vec![vec![LaurentScalar::zero(); n]; n];
        for k in 0..n {
            rows[k][k] = t(1).neg();
            if k + 1 < n {
                rows[k][k + 1] = s(k as i64 + 1);
            }
        }
        let r = m(rows).rank_report();
        assert_eq!(r.rank, n - 1);
    }
}
