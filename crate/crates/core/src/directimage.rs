//! Direct image along the coordinate embedding `{x_{r+1} = … = x_n = 0}`.

use serde::Serialize;
use thiserror::Error;

use crate::complex::{
    add_cochain, apply_differential, cochain_basis, differential, stabilized_cohomology, BasisKey,
    Cochain, CochainKey, ComplexError, DrModule, DrOptions, PushforwardModule, TruncatedComplex,
};
use crate::groebner::{ExactPoly, FilteredPresentation, WeylKey};
use crate::linalg::SparseMatrix;
use crate::monomial::Monomial;
use crate::scalars::LaurentScalar;
use crate::weyl::WeylOperator;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DirectImageError {
    #[error("embedding needs 1 <= r < n, got r = {r}, n = {n}")]
    InvalidEmbedding { r: usize, n: usize },
    #[error("module lives in {found} variables, embedding expects {expected}")]
    SourceMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// Source of dimension `r` inside the ambient disc of dimension `n`, cut
/// out by the last `n - r` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EmbeddingData {
    pub r: usize,
    pub n: usize,
}

impl EmbeddingData {
    pub fn new(r: usize, n: usize) -> Result<Self, DirectImageError> {
        if r == 0 || r >= n {
            return Err(DirectImageError::InvalidEmbedding { r, n });
        }
        Ok(EmbeddingData { r, n })
    }

    pub fn codim(&self) -> usize {
        self.n - self.r
    }

    fn check_source(&self, m: &dyn DrModule) -> Result<(), DirectImageError> {
        if m.var_count() != self.r {
            return Err(DirectImageError::SourceMismatch {
                expected: self.r,
                found: m.var_count(),
            });
        }
        Ok(())
    }
}

fn pad(m: &Monomial, n: usize) -> Monomial {
    let mut v = m.0.clone();
    v.resize(n, 0);
    Monomial(v)
}

/// Image of an operator under `𝒟_r ⊂ 𝒟_n`.
pub fn embed_relation(p: &ExactPoly, n: usize) -> ExactPoly {
    p.terms().fold(ExactPoly::zero(n), |acc, (k, c)| {
        acc.add(&ExactPoly::term(
            WeylKey {
                x: pad(&k.x, n),
                d: pad(&k.d, n),
            },
            c.clone(),
        ))
    })
}

/// `𝒟_n/(𝒟_n I + 𝒟_n x_{r+1} + … + 𝒟_n x_n)` for each summand `𝒟_r/I`.
pub fn pushforward_presentation(
    p: &FilteredPresentation,
    e: EmbeddingData,
) -> FilteredPresentation {
    assert_eq!(p.vars, e.r, "presentation must live on the source");
    let summands = p
        .summands
        .iter()
        .map(|rels| {
            let mut out: Vec<ExactPoly> = rels.iter().map(|q| embed_relation(q, e.n)).collect();
            out.extend((e.r..e.n).map(|i| ExactPoly::x(e.n, i)));
            out
        })
        .collect();
    FilteredPresentation {
        vars: e.n,
        summands,
    }
}

/// The characteristic variety gains the free conormal directions.
pub fn transport_filtration_dim(source_char_dim: usize, e: EmbeddingData) -> usize {
    assert!(source_char_dim <= 2 * e.r);
    source_char_dim + e.codim()
}

/// Left and right presentations exchanged by `P ↦ Pᵗ`.
pub fn side_change(rels: &[WeylOperator]) -> Vec<WeylOperator> {
    rels.iter().map(WeylOperator::transpose).collect()
}

pub fn build_dr_complex(
    m: &dyn DrModule,
    window: u32,
) -> Result<TruncatedComplex, DirectImageError> {
    Ok(TruncatedComplex::build(m, window)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ShiftReport {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
    pub codim: usize,
    pub equal: bool,
    pub source_window: u32,
    pub target_window: u32,
}

/// Compares `H^i` of the source with `H^{i+c}` of its direct image.
pub fn dr_shift_check(
    m: &dyn DrModule,
    e: EmbeddingData,
    opts: DrOptions,
) -> Result<ShiftReport, DirectImageError> {
    e.check_source(m)?;
    let src = stabilized_cohomology(m, opts)?;
    let push = PushforwardModule::new(m, e.n);
    let tgt = stabilized_cohomology(&push, opts)?;
    let c = e.codim();
    let equal = tgt.dims[..c].iter().all(|&d| d == 0) && tgt.dims[c..] == src.dims[..];
    Ok(ShiftReport {
        source: src.dims,
        target: tgt.dims,
        codim: c,
        equal,
        source_window: src.degree_window,
        target_window: tgt.degree_window,
    })
}

fn lift_key(key: &BasisKey, n: usize) -> BasisKey {
    BasisKey {
        x: key.x.clone(),
        tail: pad(&key.tail, key.tail.0.len() + n - key.x.0.len()),
        generator: key.generator,
    }
}

fn conormal_mask(e: EmbeddingData) -> u32 {
    (e.r..e.n).fold(0, |m, j| m | (1 << j))
}

/// `m dx_I ↦ (m ⊗ 1) dx_I ∧ dx_{r+1} ∧ … ∧ dx_n`.
pub fn chain_map(c: &Cochain, e: EmbeddingData) -> Cochain {
    let eta = conormal_mask(e);
    c.iter()
        .map(|(k, v)| {
            (
                CochainKey {
                    key: lift_key(&k.key, e.n),
                    form: k.form | eta,
                },
                v.clone(),
            )
        })
        .collect()
}

fn cochain_difference(a: &Cochain, b: &Cochain) -> Option<String> {
    let mut d = a.clone();
    for (k, v) in b {
        add_cochain(&mut d, k.clone(), &v.neg());
    }
    d.iter()
        .find(|(_, v)| !v.is_zero_at_precision())
        .map(|(k, v)| format!("{k:?} -> {v}"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DegreeCheck {
    pub degree: usize,
    pub checked: usize,
    pub offending: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainMapReport {
    pub degrees: Vec<DegreeCheck>,
    pub commutes: bool,
    pub injective: bool,
}

/// Checks `f δ = δ f` on every window basis element and that `f` is injective.
pub fn chain_map_verify(
    m: &dyn DrModule,
    e: EmbeddingData,
    window: u32,
) -> Result<ChainMapReport, DirectImageError> {
    e.check_source(m)?;
    let push = PushforwardModule::new(m, e.n);
    let mut degrees = Vec::new();
    let mut injective = true;
    for i in 0..=e.r {
        let basis = cochain_basis(m, i, window);
        let mut offending = None;
        for c in &basis {
            let single = Cochain::from([(c.clone(), LaurentScalar::one(m.precision()))]);
            let lhs = chain_map(&differential(m, c), e);
            let rhs = apply_differential(&push, &chain_map(&single, e));
            if let Some(bad) = cochain_difference(&lhs, &rhs) {
                offending = Some(format!("{c:?}: {bad}"));
                break;
            }
        }
        let images: Vec<Cochain> = basis
            .iter()
            .map(|c| {
                chain_map(
                    &Cochain::from([(c.clone(), LaurentScalar::one(m.precision()))]),
                    e,
                )
            })
            .collect();
        let mut rows: Vec<CochainKey> = images.iter().flat_map(|im| im.keys().cloned()).collect();
        rows.sort();
        rows.dedup();
        let cols: Vec<Vec<(usize, LaurentScalar)>> = images
            .iter()
            .map(|im| {
                im.iter()
                    .map(|(k, v)| (rows.binary_search(k).unwrap(), v.clone()))
                    .collect()
            })
            .collect();
        let f = SparseMatrix::from_columns(rows.len(), &cols, m.precision() as i64);
        injective &= basis.is_empty() || f.rank_report().kernel_dim == 0;
        degrees.push(DegreeCheck {
            degree: i,
            checked: basis.len(),
            offending,
        });
    }
    let commutes = degrees.iter().all(|d| d.offending.is_none());
    Ok(ChainMapReport {
        degrees,
        commutes,
        injective,
    })
}

/// The cokernel of the chain map for a hypersurface embedding, with the
/// contracting homotopy along the last coordinate.
struct Cokernel<'a> {
    push: PushforwardModule<'a>,
    last: usize,
    prec: usize,
}

impl Cokernel<'_> {
    fn last_tail(&self, k: &CochainKey) -> u32 {
        *k.key.tail.0.last().unwrap()
    }

    fn in_image(&self, k: &CochainKey) -> bool {
        self.last_tail(k) == 0 && k.form & (1 << self.last) != 0
    }

    fn project(&self, c: Cochain) -> Cochain {
        c.into_iter().filter(|(k, _)| !self.in_image(k)).collect()
    }

    fn delta(&self, c: &Cochain) -> Cochain {
        self.project(apply_differential(&self.push, c))
    }

    /// `α + ∂_n β ∧ dx_n ↦ (-1)^{t+1} β` on cochains of degree `t`.
    fn homotopy(&self, c: &Cochain) -> Cochain {
        let mut out = Cochain::new();
        for (k, v) in c {
            let b = self.last_tail(k);
            if b == 0 || k.form & (1 << self.last) == 0 {
                continue;
            }
            let t = k.form.count_ones();
            let sign = if t % 2 == 1 { 1 } else { -1 };
            let mut tail = k.key.tail.clone();
            *tail.0.last_mut().unwrap() -= 1;
            let key = BasisKey {
                x: k.key.x.clone(),
                tail,
                generator: k.key.generator,
            };
            add_cochain(
                &mut out,
                CochainKey {
                    key,
                    form: k.form & !(1 << self.last),
                },
                &v.mul(&LaurentScalar::from_int(sign, self.prec)),
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HomotopyReport {
    pub degrees: Vec<DegreeCheck>,
    pub identity_holds: bool,
    /// The homotopy sends `∂_n β ∧ dx_n` in degree one to `+β`.
    pub sign_check: bool,
}

/// Checks `δh + hδ = Id` on the window basis of the cokernel complex.
pub fn homotopy_verify(
    m: &dyn DrModule,
    e: EmbeddingData,
    window: u32,
) -> Result<HomotopyReport, DirectImageError> {
    e.check_source(m)?;
    assert_eq!(
        e.codim(),
        1,
        "the homotopy is built one coordinate at a time"
    );
    let prec = m.precision();
    let k = Cokernel {
        push: PushforwardModule::new(m, e.n),
        last: e.n - 1,
        prec,
    };
    let mut degrees = Vec::new();
    for t in 0..=e.n {
        let basis: Vec<CochainKey> = cochain_basis(&k.push, t, window)
            .into_iter()
            .filter(|c| !k.in_image(c))
            .collect();
        let mut offending = None;
        for c in &basis {
            let single = Cochain::from([(c.clone(), LaurentScalar::one(prec))]);
            let mut sum = k.delta(&k.homotopy(&single));
            for (key, v) in k.homotopy(&k.delta(&single)) {
                add_cochain(&mut sum, key, &v);
            }
            if let Some(bad) = cochain_difference(&sum, &single) {
                offending = Some(format!("{c:?}: {bad}"));
                break;
            }
        }
        degrees.push(DegreeCheck {
            degree: t,
            checked: basis.len(),
            offending,
        });
    }
    let sign_check = m.basis(0).first().is_none_or(|b| {
        let beta = CochainKey {
            key: lift_key(b, e.n),
            form: 0,
        };
        let mut raised = beta.clone();
        *raised.key.tail.0.last_mut().unwrap() += 1;
        raised.form |= 1 << k.last;
        let h = k.homotopy(&Cochain::from([(raised, LaurentScalar::one(prec))]));
        cochain_difference(&h, &Cochain::from([(beta, LaurentScalar::one(prec))])).is_none()
    });
    let identity_holds = degrees.iter().all(|d| d.offending.is_none());
    Ok(HomotopyReport {
        degrees,
        identity_holds,
        sign_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::FlatConnection;
    use crate::groebner::{is_holonomic, laurent};
    use crate::ratfunc::RatFunc;
    use crate::scalars::rat;
    use crate::tate::TateElement;
    use proptest::prelude::*;

    const P: usize = 8;

    fn conn(n: i64, k: i64) -> FlatConnection {
        FlatConnection::rank_one(
            TateElement::from_scalar(1, &LaurentScalar::monomial(rat(n), k, P)),
            P,
        )
    }

    fn corpus() -> Vec<FlatConnection> {
        vec![FlatConnection::trivial(1, 1, P), conn(-1, -1), conn(-1, 1)]
    }

    fn e12() -> EmbeddingData {
        EmbeddingData::new(1, 2).unwrap()
    }

    #[test]
    fn embedding_validation() {
        assert!(EmbeddingData::new(2, 2).is_err());
        assert!(EmbeddingData::new(0, 2).is_err());
        assert_eq!(e12().codim(), 1);
    }

    #[test]
    fn presentation_transport() {
        let pole = ExactPoly::d(1, 0).sub(&ExactPoly::constant(1, laurent(&[(-1, 1)])));
        let p = pushforward_presentation(&FilteredPresentation::cyclic(1, vec![pole]), e12());
        assert_eq!(p.vars, 2);
        assert_eq!(
            p.summands[0],
            vec![
                ExactPoly::d(2, 0).sub(&ExactPoly::constant(2, laurent(&[(-1, 1)]))),
                ExactPoly::x(2, 1)
            ]
        );
        let o = FilteredPresentation::cyclic(1, vec![ExactPoly::d(1, 0)]);
        let once = pushforward_presentation(&o, EmbeddingData::new(1, 3).unwrap());
        let twice = pushforward_presentation(
            &pushforward_presentation(&o, e12()),
            EmbeddingData::new(2, 3).unwrap(),
        );
        assert_eq!(once.summands, twice.summands);
        let sum = pushforward_presentation(&o.direct_sum(&o), e12());
        assert_eq!(
            sum.summands,
            [
                pushforward_presentation(&o, e12()).summands,
                pushforward_presentation(&o, e12()).summands
            ]
            .concat()
        );
    }

    #[test]
    fn filtration_and_holonomicity() {
        let e = e12();
        assert_eq!(transport_filtration_dim(1, e), 2);
        assert_eq!(transport_filtration_dim(2, e), 3);
        let o = FilteredPresentation::cyclic(1, vec![ExactPoly::d(1, 0)]);
        let src = is_holonomic(&o);
        let tgt = is_holonomic(&pushforward_presentation(&o, e));
        assert_eq!(
            tgt.char_dimension,
            Some(transport_filtration_dim(src.char_dimension.unwrap(), e))
        );
        assert!(tgt.holonomic);
        let pole = ExactPoly::d(1, 0).sub(&ExactPoly::constant(1, RatFunc::t_pow(-1)));
        let xd = ExactPoly::x(1, 0)
            .weyl_mul(&ExactPoly::d(1, 0))
            .sub(&ExactPoly::constant(1, RatFunc::from_rational(rat(2))));
        for rel in [pole, xd] {
            let p = FilteredPresentation::cyclic(1, vec![rel]);
            assert!(is_holonomic(&p).holonomic);
            assert!(is_holonomic(&pushforward_presentation(&p, e)).holonomic);
        }
    }

    #[test]
    fn side_change_examples() {
        let d = WeylOperator::d(1, 0, P);
        let x = WeylOperator::x(1, 0, P);
        assert!(side_change(std::slice::from_ref(&d))[0].eq_at_precision(&d.neg()));
        let xd = x.mul(&d);
        let expected = xd.neg().sub(&WeylOperator::one(1, P));
        assert!(side_change(std::slice::from_ref(&xd))[0].eq_at_precision(&expected));
        assert!(side_change(&side_change(std::slice::from_ref(&xd)))[0].eq_at_precision(&xd));
    }

    #[test]
    fn complexes_square_to_zero() {
        let o1 = FlatConnection::trivial(1, 1, P);
        let c = build_dr_complex(&o1, 4).unwrap();
        assert_eq!(c.differentials.len(), 1);
        let push = PushforwardModule::new(&o1, 2);
        let c2 = build_dr_complex(&push, 4).unwrap();
        assert_eq!(c2.differentials.len(), 2);
        let p = conn(-1, -1);
        assert!(build_dr_complex(&PushforwardModule::new(&p, 2), 4).is_ok());
    }

    #[test]
    fn shift_on_corpus() {
        let expected = [vec![1, 0], vec![0, 0], vec![1, 0]];
        for (m, want) in corpus().iter().zip(expected) {
            let r = dr_shift_check(m, e12(), DrOptions::default()).unwrap();
            assert!(r.equal, "{r:?}");
            assert_eq!(r.source, want);
        }
    }

    #[test]
    fn chain_map_on_corpus() {
        for m in corpus() {
            let r = chain_map_verify(&m, e12(), 8).unwrap();
            assert!(r.commutes && r.injective, "{r:?}");
        }
        let o = FlatConnection::trivial(1, 1, P);
        let r = chain_map_verify(&o, e12(), 0).unwrap();
        assert_eq!(r.degrees[0].checked, 1);
        assert!(r.commutes);
    }

    #[test]
    fn homotopy_on_corpus() {
        for (n, k) in [(0, 0), (-1, -1), (-1, 1)] {
            let m = if n == 0 {
                FlatConnection::trivial(1, 1, 6)
            } else {
                FlatConnection::rank_one(
                    TateElement::from_scalar(1, &LaurentScalar::monomial(rat(n), k, 6)),
                    6,
                )
            };
            let r = homotopy_verify(&m, e12(), 6).unwrap();
            assert!(r.identity_holds && r.sign_check, "{r:?}");
            assert!(r.degrees.iter().all(|d| d.checked > 0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn chain_map_commutes_for_random_connections(
            cs in proptest::collection::vec((-3i64..=3, -2i64..=2), 1..=3)
        ) {
            let a = cs.iter().enumerate().fold(TateElement::zero(1), |acc, (i, &(q, k))| {
                acc.add(&TateElement::monomial(1, &LaurentScalar::monomial(rat(q), k, P), Monomial(vec![i as u32])))
            });
            let m = FlatConnection::rank_one(a, P);
            let r = chain_map_verify(&m, e12(), 8).unwrap();
            prop_assert!(r.commutes && r.injective);
        }
    }
}
