//! D-modules on the one-dimensional disc: connections, cyclic modules and
//! their de Rham cohomology.

use serde::Serialize;
use thiserror::Error;

use crate::complex::{stabilized_cohomology, ComplexError, DrModule, DrOptions, FlatConnection};
use crate::monomial::Monomial;
use crate::scalars::{LaurentScalar, Rational, Valuation};
use crate::tate::TateElement;
use crate::weyl::WeylOperator;

pub type ConnectionModule = FlatConnection;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DModuleError {
    #[error("leading coefficient is not a unit of the Tate algebra")]
    LeadingCoefficientNotUnit,
    #[error("relation must be a nonzero operator in one variable")]
    InvalidRelation,
    #[error("connection has no integral model")]
    NoModelAvailable,
    #[error("relation is neither a certified unit nor convertible to a connection")]
    InconclusiveRoute,
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// `𝒟₁ / 𝒟₁ P`.
#[derive(Debug, Clone)]
pub struct CyclicModule {
    relation: WeylOperator,
}

impl CyclicModule {
    pub fn new(relation: WeylOperator) -> Result<Self, DModuleError> {
        if relation.vars() != 1 || relation.is_zero() {
            return Err(DModuleError::InvalidRelation);
        }
        Ok(CyclicModule { relation })
    }

    pub fn relation(&self) -> &WeylOperator {
        &self.relation
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DrReport {
    pub h0: usize,
    pub h1: usize,
    pub t_precision: usize,
    pub degree_window: u32,
    pub stabilized: bool,
    pub reliable: bool,
    pub trajectory: Vec<(u32, Vec<usize>)>,
}

impl DrReport {
    pub fn euler_characteristic(&self) -> i64 {
        self.h0 as i64 - self.h1 as i64
    }
}

/// Companion realization: with `P = a_r(∂^r + Σ b_k ∂^k)` the classes of
/// `1, ∂, …, ∂^{r-1}` form a basis and `∂ e_{r-1} = -Σ b_k e_k`.
pub fn cyclic_to_connection(m: &CyclicModule) -> Result<ConnectionModule, DModuleError> {
    let p = &m.relation;
    let prec = p.precision();
    let r = p.order().ok_or(DModuleError::InvalidRelation)? as usize;
    if r == 0 {
        return Err(DModuleError::LeadingCoefficientNotUnit);
    }
    let lead = p.coefficient(&Monomial(vec![r as u32]));
    let lead_inv = lead
        .invert_unit()
        .map_err(|_| DModuleError::LeadingCoefficientNotUnit)?;
    let mut a = vec![vec![TateElement::zero(1); r]; r];
    for g in 0..r - 1 {
        a[g + 1][g] = TateElement::one(1, prec);
    }
    for (h, row) in a.iter_mut().enumerate() {
        let b = lead_inv.mul(&p.coefficient(&Monomial(vec![h as u32])));
        row[r - 1] = b.neg();
    }
    Ok(FlatConnection::from_matrix(a, prec)?)
}

fn to_dr_report(m: &dyn DrModule, opts: DrOptions) -> Result<DrReport, DModuleError> {
    let c = stabilized_cohomology(m, opts)?;
    Ok(DrReport {
        h0: c.dims[0],
        h1: c.dims[1],
        t_precision: c.t_precision,
        degree_window: c.degree_window,
        stabilized: c.stabilized,
        reliable: c.reliable,
        trajectory: c.trajectory,
    })
}

/// `(h0, h1)` of `d/dx + A` on `K⟨x⟩^r` by window doubling.
pub fn dr_cohomology(m: &ConnectionModule, opts: DrOptions) -> Result<DrReport, DModuleError> {
    assert_eq!(m.var_count(), 1, "direct computation is for one variable");
    to_dr_report(m, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelVerdict {
    ModelCertified,
    NoModel,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectralEstimate {
    /// Bounds on `log_|t| |∇^k|^{1/k}` over the sampled `k`; `None` when every iterate vanished.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub log_norms: Vec<Option<i64>>,
    pub verdict: ModelVerdict,
}

fn is_integral(m: &ConnectionModule) -> bool {
    m.matrix(0)
        .iter()
        .flatten()
        .all(|f| f.gauss_norm().lower_bound() >= 0)
}

/// Log-norms of `∇^k e_g` for `k ≤ k_max`, with a three-valued verdict.
pub fn spectral_radius_estimate(m: &ConnectionModule, k_max: u32) -> SpectralEstimate {
    assert!(k_max >= 1);
    let r = m.rank();
    let mut vecs: Vec<Vec<TateElement>> = (0..r)
        .map(|g| {
            (0..r)
                .map(|h| {
                    if h == g {
                        TateElement::one(1, m.precision())
                    } else {
                        TateElement::zero(1)
                    }
                })
                .collect()
        })
        .collect();
    let a = m.matrix(0);
    let mut log_norms = Vec::new();
    for _ in 0..k_max {
        vecs = vecs
            .iter()
            .map(|f| {
                (0..r)
                    .map(|h| (0..r).fold(f[h].derivative(0), |acc, g| acc.add(&a[h][g].mul(&f[g]))))
                    .collect()
            })
            .collect();
        let v = vecs
            .iter()
            .flatten()
            .filter_map(|f| f.gauss_norm().finite())
            .min();
        log_norms.push(v);
    }
    let ratios: Vec<(u32, f64)> = log_norms
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i as u32 + 1, v as f64 / (i as f64 + 1.0))))
        .collect();
    let lower = ratios.iter().map(|r| r.1).reduce(f64::min);
    let upper = ratios.iter().map(|r| r.1).reduce(f64::max);
    let tail_start = k_max.div_ceil(2);
    let tail: Vec<Option<f64>> = (tail_start..=k_max)
        .map(|k| ratios.iter().find(|r| r.0 == k).map(|r| r.1))
        .collect();
    let verdict = if is_integral(m) {
        ModelVerdict::ModelCertified
    } else if !tail.is_empty() && tail.iter().all(|v| v.is_some_and(|x| x < 0.0)) {
        ModelVerdict::NoModel
    } else {
        ModelVerdict::Inconclusive
    };
    SpectralEstimate {
        lower,
        upper,
        log_norms,
        verdict,
    }
}

/// Connection `d/dx + Ā` on `k[x]^r` with polynomial entries over ℚ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidueConnection {
    /// `entries[h][g]` lists `(exponent, coefficient)` pairs.
    pub entries: Vec<Vec<Vec<(u32, String)>>>,
    #[serde(skip)]
    values: Vec<Vec<Vec<(u32, Rational)>>>,
}

impl ResidueConnection {
    pub fn new(values: Vec<Vec<Vec<(u32, Rational)>>>) -> Self {
        let entries = values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.iter().map(|(k, q)| (*k, q.to_string())).collect())
                    .collect()
            })
            .collect();
        ResidueConnection { entries, values }
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(Vec::is_empty)
    }

    /// The same connection over `K` at relative precision one, so that
    /// rank computations reduce to exact linear algebra over `ℚ`.
    fn as_connection(&self) -> FlatConnection {
        let a = self
            .values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| {
                        TateElement::from_terms(
                            1,
                            e.iter().map(|(k, q)| {
                                (
                                    Monomial(vec![*k]),
                                    LaurentScalar::from_rational(q.clone(), 1),
                                )
                            }),
                        )
                    })
                    .collect()
            })
            .collect();
        FlatConnection::from_matrix(a, 1).expect("one-variable connections are integrable")
    }
}

/// `Ā = A mod t` for an integral connection.
pub fn reduce_model(m: &ConnectionModule) -> Result<ResidueConnection, DModuleError> {
    if spectral_radius_estimate(m, 4).verdict != ModelVerdict::ModelCertified {
        return Err(DModuleError::NoModelAvailable);
    }
    let values = m
        .matrix(0)
        .iter()
        .map(|row| {
            row.iter()
                .map(|f| {
                    f.terms()
                        .into_iter()
                        .filter_map(|(x, c)| {
                            c.coefficient(0)
                                .filter(|q| *q != Rational::from_integer(0.into()))
                                .map(|q| (x.0[0], q))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(ResidueConnection::new(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResidueEuler {
    pub h0: usize,
    pub h1: usize,
    pub chi: i64,
}

/// Kernel and cokernel of `d/dx + Ā` on `k[x]^r` by window doubling.
pub fn euler_char_residue(
    a: &ResidueConnection,
    opts: DrOptions,
) -> Result<ResidueEuler, DModuleError> {
    let c = stabilized_cohomology(&a.as_connection(), opts)?;
    let (h0, h1) = (c.dims[0], c.dims[1]);
    Ok(ResidueEuler {
        h0,
        h1,
        chi: h0 as i64 - h1 as i64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChiTransferReport {
    pub chi_generic: i64,
    pub chi_residue: i64,
    pub generic: DrReport,
    pub residue: ResidueEuler,
    pub reduction: ResidueConnection,
    pub equal: bool,
}

/// Euler characteristic over `K⟨x⟩` against that of the reduction over `k[x]`.
pub fn verify_chi_transfer(
    m: &ConnectionModule,
    opts: DrOptions,
) -> Result<ChiTransferReport, DModuleError> {
    let reduction = reduce_model(m)?;
    let generic = dr_cohomology(m, opts)?;
    let residue = euler_char_residue(&reduction, opts)?;
    let chi_generic = generic.euler_characteristic();
    Ok(ChiTransferReport {
        chi_generic,
        chi_residue: residue.chi,
        equal: chi_generic == residue.chi,
        generic,
        residue,
        reduction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HatInvarianceReport {
    /// Dimensions through the companion connection, when it exists.
    pub direct: Option<(usize, usize)>,
    /// Whether the relation is a certified unit of the completed algebra,
    /// forcing the completed module and its cohomology to vanish.
    pub completed_unit: bool,
    pub agree: bool,
}

/// Compares the direct computation with the completed-algebra route.
pub fn hat_invariance_check(
    m: &CyclicModule,
    opts: DrOptions,
) -> Result<HatInvarianceReport, DModuleError> {
    let completed_unit = m.relation.invert_unit().is_ok();
    let direct = match cyclic_to_connection(m) {
        Ok(c) => {
            let r = dr_cohomology(&c, opts)?;
            Some((r.h0, r.h1))
        }
        Err(DModuleError::LeadingCoefficientNotUnit) => None,
        Err(e) => return Err(e),
    };
    if direct.is_none() && !completed_unit {
        return Err(DModuleError::InconclusiveRoute);
    }
    let agree = !completed_unit || direct.is_none_or(|d| d == (0, 0));
    Ok(HatInvarianceReport {
        direct,
        completed_unit,
        agree,
    })
}

/// The analytic `(h0, h1)` for `∇ = d/dx + λ` with `λ` a scalar.
pub fn scalar_connection_table(lambda: &LaurentScalar) -> (usize, usize) {
    match lambda.valuation() {
        Valuation::Finite(v) if v < 1 => (0, 0),
        _ => (1, 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::rat;

    const P: usize = 8;

    fn s(n: i64, k: i64) -> LaurentScalar {
        LaurentScalar::monomial(rat(n), k, P)
    }

    fn op(terms: &[(i64, i64, u32)]) -> WeylOperator {
        terms
            .iter()
            .fold(WeylOperator::zero(1, P), |acc, &(n, k, d)| {
                acc.add(&WeylOperator::scalar(1, &s(n, k), P).mul(&WeylOperator::d(1, 0, P).pow(d)))
            })
    }

    fn rank_one(n: i64, k: i64) -> ConnectionModule {
        FlatConnection::rank_one(TateElement::from_scalar(1, &s(n, k)), P)
    }

    #[test]
    fn companion_examples() {
        let c = cyclic_to_connection(&CyclicModule::new(op(&[(1, 0, 1), (-1, -1, 0)])).unwrap())
            .unwrap();
        assert_eq!(c.rank(), 1);
        assert_eq!(c.matrix(0)[0][0], TateElement::from_scalar(1, &s(1, -1)));
        let c2 = cyclic_to_connection(&CyclicModule::new(op(&[(1, 0, 0), (-1, 1, 1)])).unwrap())
            .unwrap();
        assert_eq!(c2.matrix(0)[0][0], c.matrix(0)[0][0]);
        let x = WeylOperator::x(1, 0, P);
        let bad = x
            .mul(&WeylOperator::d(1, 0, P))
            .sub(&WeylOperator::one(1, P));
        assert_eq!(
            cyclic_to_connection(&CyclicModule::new(bad).unwrap()).unwrap_err(),
            DModuleError::LeadingCoefficientNotUnit
        );
    }

    #[test]
    fn companion_of_second_order() {
        // ∂² − t² has solutions exp(±tx); both lie in the Tate algebra
        let c = cyclic_to_connection(&CyclicModule::new(op(&[(1, 0, 2), (-1, 2, 0)])).unwrap())
            .unwrap();
        let r = dr_cohomology(&c, DrOptions::default()).unwrap();
        assert_eq!((r.h0, r.h1), (2, 0));
    }

    #[test]
    fn dr_examples() {
        let r = dr_cohomology(&FlatConnection::trivial(1, 1, P), DrOptions::default()).unwrap();
        assert_eq!((r.h0, r.h1, r.stabilized), (1, 0, true));
        let r = dr_cohomology(&rank_one(-1, -1), DrOptions::default()).unwrap();
        assert_eq!((r.h0, r.h1), (0, 0));
        let r = dr_cohomology(&rank_one(-1, 1), DrOptions::default()).unwrap();
        assert_eq!((r.h0, r.h1), (1, 0));
    }

    #[test]
    fn exp_tx_recursion_oracle() {
        // a_{n+1} = (g_n + t a_n)/(n+1) with g = 0 solves f' = t f from a_0 = 1
        let mut a = vec![LaurentScalar::one(P)];
        for n in 0..20 {
            let next = a[n]
                .mul(&s(1, 1))
                .div(&LaurentScalar::from_int(n as i64 + 1, P))
                .unwrap();
            a.push(next);
        }
        let f = TateElement::from_terms(
            1,
            a.iter()
                .enumerate()
                .map(|(n, c)| (Monomial(vec![n as u32]), c.clone())),
        );
        let residual = f.derivative(0).sub(&f.scale_by(&s(1, 1)));
        assert!(residual.gauss_norm().lower_bound() >= 8);
        let conn = rank_one(-1, 1);
        assert_eq!(dr_cohomology(&conn, DrOptions::default()).unwrap().h0, 1);
    }

    #[test]
    fn lambda_family_matches_table() {
        for (n, k) in [(0, 0), (1, 1), (1, 2), (1, 0), (1, -1)] {
            let lambda = if n == 0 {
                LaurentScalar::zero()
            } else {
                s(n, k)
            };
            let conn = FlatConnection::rank_one(TateElement::from_scalar(1, &lambda), P);
            let r = dr_cohomology(&conn, DrOptions::default()).unwrap();
            assert_eq!(
                (r.h0, r.h1),
                scalar_connection_table(&lambda),
                "lambda = {lambda}"
            );
        }
    }

    #[test]
    fn spectral_examples() {
        assert_eq!(
            spectral_radius_estimate(&FlatConnection::trivial(1, 1, P), 6).verdict,
            ModelVerdict::ModelCertified
        );
        let e = spectral_radius_estimate(&rank_one(-1, -1), 6);
        assert_eq!(e.verdict, ModelVerdict::NoModel);
        assert_eq!((e.lower, e.upper), (Some(-1.0), Some(-1.0)));
        let minus_x = FlatConnection::rank_one(TateElement::var(1, 0, P).neg(), P);
        let e = spectral_radius_estimate(&minus_x, 6);
        assert_eq!(e.verdict, ModelVerdict::ModelCertified);
        assert!(e.lower.unwrap() >= 0.0);
    }

    #[test]
    fn reduction_examples() {
        assert!(reduce_model(&FlatConnection::trivial(1, 1, P))
            .unwrap()
            .is_zero());
        let x = TateElement::var(1, 0, P);
        let a = x.neg().add(&x.mul(&x).scale_by(&s(1, 1)));
        let red = reduce_model(&FlatConnection::rank_one(a, P)).unwrap();
        assert_eq!(red.entries, vec![vec![vec![(1, "-1".to_string())]]]);
        assert_eq!(
            reduce_model(&rank_one(-1, -1)).unwrap_err(),
            DModuleError::NoModelAvailable
        );
    }

    #[test]
    fn residue_examples() {
        let opts = DrOptions::default();
        let zero = ResidueConnection::new(vec![vec![vec![]]]);
        assert_eq!(
            euler_char_residue(&zero, opts).unwrap(),
            ResidueEuler {
                h0: 1,
                h1: 0,
                chi: 1
            }
        );
        let minus_x = ResidueConnection::new(vec![vec![vec![(1, rat(-1))]]]);
        assert_eq!(
            euler_char_residue(&minus_x, opts).unwrap(),
            ResidueEuler {
                h0: 0,
                h1: 1,
                chi: -1
            }
        );
        let c = ResidueConnection::new(vec![vec![vec![(0, rat(3))]]]);
        assert_eq!(
            euler_char_residue(&c, opts).unwrap(),
            ResidueEuler {
                h0: 0,
                h1: 0,
                chi: 0
            }
        );
    }

    #[test]
    fn chi_transfer_examples() {
        let opts = DrOptions::default();
        let minus_x = FlatConnection::rank_one(TateElement::var(1, 0, P).neg(), P);
        for (m, chi) in [
            (FlatConnection::trivial(1, 1, P), 1),
            (minus_x, -1),
            (rank_one(-1, 1), 1),
        ] {
            let r = verify_chi_transfer(&m, opts).unwrap();
            assert!(r.equal);
            assert_eq!(r.chi_generic, chi);
        }
    }

    #[test]
    fn hat_invariance_examples() {
        let opts = DrOptions::default();
        let r = hat_invariance_check(
            &CyclicModule::new(op(&[(1, 0, 0), (-1, 1, 1)])).unwrap(),
            opts,
        )
        .unwrap();
        assert!(r.completed_unit && r.agree);
        assert_eq!(r.direct, Some((0, 0)));
        let r = hat_invariance_check(&CyclicModule::new(op(&[(1, 0, 1)])).unwrap(), opts).unwrap();
        assert!(!r.completed_unit);
        assert_eq!(r.direct, Some((1, 0)));
        let r = hat_invariance_check(
            &CyclicModule::new(op(&[(1, 0, 1), (-1, -1, 0)])).unwrap(),
            opts,
        )
        .unwrap();
        assert!(r.completed_unit && r.agree);
        let x = WeylOperator::x(1, 0, P);
        let bad = x
            .mul(&WeylOperator::d(1, 0, P))
            .sub(&WeylOperator::one(1, P));
        assert_eq!(
            hat_invariance_check(&CyclicModule::new(bad).unwrap(), opts).unwrap_err(),
            DModuleError::InconclusiveRoute
        );
    }
}
