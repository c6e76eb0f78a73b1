//! The Spencer resolution of the structure sheaf on a flat coordinate
//! frame, and its comparison with the de Rham complex.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::complex::{
    act_exact, forms, BasisKey, CochainKey, ComplexError, DrModule, ModuleVector, TruncatedComplex,
};
use crate::groebner::ExactPoly;
use crate::linalg::SparseMatrix;
use crate::monomial::Monomial;
use crate::scalars::LaurentScalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpencerError {
    #[error("Spencer complexes are built for 1 <= n <= 3, got {0}")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// Free left modules `𝒟ₙ ⊗ ∧^k Θ` in degrees `-n..=0`.
#[derive(Debug, Clone)]
pub struct SpencerComplex {
    pub n: usize,
    /// `differentials[k-1][target][source]`: the coefficient of `θ_K` in the
    /// image of `1 ⊗ θ_J` under `Sp^{-k} → Sp^{-k+1}`, acting by right
    /// multiplication.
    pub differentials: Vec<Vec<Vec<ExactPoly>>>,
}

impl SpencerComplex {
    pub fn ranks(&self) -> Vec<usize> {
        (0..=self.n).map(|k| forms(self.n, k).len()).collect()
    }

    /// Coefficient of `θ_K` in `d(1 ⊗ θ_J)`; both are wedge bitmasks.
    pub fn entry(&self, target: u32, source: u32) -> &ExactPoly {
        let k = source.count_ones() as usize;
        let t = forms(self.n, k - 1).binary_search(&target).unwrap();
        let s = forms(self.n, k).binary_search(&source).unwrap();
        &self.differentials[k - 1][t][s]
    }

    /// Every `d_{k-1} ∘ d_k` expanded in the Weyl algebra.
    pub fn compositions_vanish(&self) -> bool {
        (2..=self.n).all(|k| {
            let outer = &self.differentials[k - 2];
            let inner = &self.differentials[k - 1];
            let sources = inner[0].len();
            (0..outer.len()).all(|t| {
                (0..sources).all(|s| {
                    let sum = (0..inner.len()).fold(ExactPoly::zero(self.n), |acc, mid| {
                        // right multiplication: first by the inner entry, then the outer
                        acc.add(&inner[mid][s].weyl_mul(&outer[t][mid]))
                    });
                    sum.is_zero()
                })
            })
        })
    }
}

/// `P ⊗ θ_{j_1} ∧ … ∧ θ_{j_k} ↦ Σ_i (-1)^{i+1} P ∂_{j_i} ⊗ θ_{J ∖ j_i}`.
pub fn build_spencer(n: usize) -> Result<SpencerComplex, SpencerError> {
    if !(1..=3).contains(&n) {
        return Err(SpencerError::UnsupportedDimension(n));
    }
    let differentials = (1..=n)
        .map(|k| {
            let targets = forms(n, k - 1);
            let sources = forms(n, k);
            targets
                .iter()
                .map(|&t| {
                    sources
                        .iter()
                        .map(|&s| {
                            if t & s != t {
                                return ExactPoly::zero(n);
                            }
                            let j = (s & !t).trailing_zeros() as usize;
                            let d = ExactPoly::d(n, j);
                            if (s & ((1 << j) - 1)).count_ones().is_multiple_of(2) {
                                d
                            } else {
                                d.neg()
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(SpencerComplex { n, differentials })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MatrixComparison {
    pub degree: usize,
    pub rows: usize,
    pub cols: usize,
    pub nonzero_entries: usize,
    pub mismatch: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpencerDrReport {
    pub degrees: Vec<MatrixComparison>,
    pub equal: bool,
}

/// `Hom(Sp^{-k}, M) ≅ M^{∧^k}` with `(φ∘d)(θ_J) = Σ_K d[K][J] · φ(θ_K)`,
/// compared entrywise with the de Rham differential under `dx_I ↔ θ_I^*`.
pub fn hom_spencer_equals_dr(
    m: &dyn DrModule,
    window: u32,
) -> Result<SpencerDrReport, SpencerError> {
    let n = m.var_count();
    let sp = build_spencer(n)?;
    let dr = TruncatedComplex::build(m, window)?;
    let prec = m.precision();
    let mut degrees = Vec::new();
    for (k, dm) in dr.differentials.iter().enumerate() {
        let row_index: BTreeMap<_, usize> =
            dm.rows.iter().enumerate().map(|(i, r)| (r, i)).collect();
        let mut hom = SparseMatrix::new(dm.rows.len(), dm.columns.len(), prec as i64);
        let mut mismatch = None;
        for (c, col) in dm.columns.iter().enumerate() {
            let v = ModuleVector::from([(col.key.clone(), LaurentScalar::one(prec))]);
            for &target in forms(n, k + 1)
                .iter()
                .filter(|&&f| f & col.form == col.form)
            {
                for (key, val) in act_exact(m, sp.entry(col.form, target), &v) {
                    let ck = CochainKey { key, form: target };
                    match row_index.get(&ck) {
                        Some(&r) => hom.add_to(r, c, &val),
                        None => {
                            mismatch = Some(format!("row {ck:?} missing from the de Rham matrix"))
                        }
                    }
                }
            }
        }
        let mut nonzero = 0;
        for r in 0..dm.rows.len() {
            let cols: std::collections::BTreeSet<usize> = dm.matrix.data[r]
                .keys()
                .chain(hom.data[r].keys())
                .copied()
                .collect();
            for c in cols {
                let (a, b) = (dm.matrix.get(r, c), hom.get(r, c));
                nonzero += 1;
                if mismatch.is_none() && !a.sub(&b).is_zero_at_precision() {
                    mismatch = Some(format!(
                        "({:?}, {:?}): de Rham {a}, Spencer {b}",
                        dm.rows[r], dm.columns[c]
                    ));
                }
            }
        }
        degrees.push(MatrixComparison {
            degree: k,
            rows: dm.rows.len(),
            cols: dm.columns.len(),
            nonzero_entries: nonzero,
            mismatch,
        });
    }
    let equal = degrees.iter().all(|d| d.mismatch.is_none());
    Ok(SpencerDrReport { degrees, equal })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResolutionReport {
    pub n: usize,
    pub window: u32,
    /// Homology of `Sp^{-k}` for `k = n, …, 0`, then of the augmentation target.
    pub homology: Vec<usize>,
    pub augmentation_surjective: bool,
    pub exact: bool,
}

fn spencer_basis(n: usize, k: usize, window: u32) -> Vec<BasisKey> {
    let mut out = Vec::new();
    for x in Monomial::up_to_degree(n, window) {
        for tail in Monomial::up_to_degree(n, window.saturating_sub(k as u32)) {
            for (g, _) in forms(n, k).iter().enumerate() {
                out.push(BasisKey {
                    x: x.clone(),
                    tail: tail.clone(),
                    generator: g,
                });
            }
        }
    }
    out.sort();
    out
}

/// Exactness of `Sp^• → O → 0` on the graded pieces of `x`-degree and
/// weight `|∂| + k` at most `window`, over the residue field.
pub fn resolution_check_truncated(n: usize, window: u32) -> Result<ResolutionReport, SpencerError> {
    let sp = build_spencer(n)?;
    if window < n as u32 {
        return Err(ComplexError::WindowTooSmall(window).into());
    }
    let prec = 1;
    let one = LaurentScalar::one(prec);
    let bases: Vec<Vec<BasisKey>> = (0..=n).map(|k| spencer_basis(n, k, window)).collect();
    let matrix = |k: usize| -> SparseMatrix {
        let src = &bases[k];
        let tgt = &bases[k - 1];
        let (ts, ss) = (forms(n, k - 1), forms(n, k));
        let mut m = SparseMatrix::new(tgt.len(), src.len(), prec as i64);
        for (c, key) in src.iter().enumerate() {
            for (ti, &t) in ts.iter().enumerate() {
                let entry = sp.entry(t, ss[key.generator]);
                for (wk, q) in entry.terms() {
                    let mut tail = key.tail.clone();
                    for (j, e) in wk.d.0.iter().enumerate() {
                        tail.0[j] += e;
                    }
                    let target = BasisKey {
                        x: key.x.clone(),
                        tail,
                        generator: ti,
                    };
                    let r = tgt.binary_search(&target).expect("weight is preserved");
                    m.add_to(r, c, &q.to_laurent(prec));
                }
            }
        }
        m
    };
    let xs = Monomial::up_to_degree(n, window);
    let mut aug = SparseMatrix::new(xs.len(), bases[0].len(), prec as i64);
    for (c, key) in bases[0].iter().enumerate() {
        if key.tail.is_one() {
            aug.add_to(xs.binary_search(&key.x).unwrap(), c, &one);
        }
    }
    let ranks: Vec<usize> = (1..=n).map(|k| matrix(k).rank_report().rank).collect();
    let aug_rank = aug.rank_report().rank;
    // rank of the map leaving Sp^{-k}, and of the one arriving
    let outgoing = |k: usize| if k == 0 { aug_rank } else { ranks[k - 1] };
    let incoming = |k: usize| if k == n { 0 } else { ranks[k] };
    let mut homology: Vec<usize> = (0..=n)
        .rev()
        .map(|k| bases[k].len() - outgoing(k) - incoming(k))
        .collect();
    homology.push(xs.len() - aug_rank);
    let augmentation_surjective = aug_rank == xs.len();
    let exact = homology.iter().all(|&h| h == 0);
    Ok(ResolutionReport {
        n,
        window,
        homology,
        augmentation_surjective,
        exact,
    })
}
