//! De Rham complexes of D-modules on truncated monomial bases.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::groebner::{reduce, standard_monomials, Algebra, ExactPoly, WeylKey};
use crate::linalg::SparseMatrix;
use crate::monomial::Monomial;
use crate::ratfunc::RatFunc;
use crate::scalars::LaurentScalar;
use crate::tate::TateElement;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComplexError {
    #[error("connection matrices have inconsistent shapes")]
    ShapeMismatch,
    #[error("connection is not integrable")]
    NotIntegrable,
    #[error("window {0} contains no basis element")]
    WindowTooSmall(u32),
    #[error("differential does not square to zero in degree {0}")]
    NotSquareZero(usize),
    #[error("cohomology still moving at the window cap: {trajectory:?}")]
    NoStabilization { trajectory: Vec<(u32, Vec<usize>)> },
}

/// Basis element `x^x ∂^tail · e_generator` of a module.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BasisKey {
    pub x: Monomial,
    pub tail: Monomial,
    pub generator: usize,
}

impl BasisKey {
    pub fn degree(&self) -> u32 {
        self.x.degree() + self.tail.degree()
    }
}

pub type ModuleVector = BTreeMap<BasisKey, LaurentScalar>;

/// A D-module with a K-basis indexed by [`BasisKey`], graded by degree so
/// that windows of bounded degree are finite.
pub trait DrModule {
    fn var_count(&self) -> usize;
    fn precision(&self) -> usize;
    /// All basis elements of degree at most `window`, sorted.
    fn basis(&self, window: u32) -> Vec<BasisKey>;
    fn apply_d(&self, j: usize, key: &BasisKey) -> ModuleVector;
    fn apply_x(&self, j: usize, key: &BasisKey) -> ModuleVector;
}

pub(crate) fn accumulate(v: &mut ModuleVector, k: BasisKey, c: &LaurentScalar) {
    if c.is_exact_zero() {
        return;
    }
    match v.get_mut(&k) {
        Some(slot) => {
            *slot = slot.add(c);
            if slot.is_exact_zero() {
                v.remove(&k);
            }
        }
        None => {
            v.insert(k, c.clone());
        }
    }
}

fn extend_linear<F>(v: &ModuleVector, mut f: F) -> ModuleVector
where
    F: FnMut(&BasisKey) -> ModuleVector,
{
    let mut out = ModuleVector::new();
    for (k, c) in v {
        for (k2, c2) in f(k) {
            accumulate(&mut out, k2, &c.mul(&c2));
        }
    }
    out
}

pub fn act_d(m: &dyn DrModule, j: usize, v: &ModuleVector) -> ModuleVector {
    extend_linear(v, |k| m.apply_d(j, k))
}

pub fn act_x(m: &dyn DrModule, j: usize, v: &ModuleVector) -> ModuleVector {
    extend_linear(v, |k| m.apply_x(j, k))
}

/// Action of an exact operator `Σ c x^a ∂^b` (normal form, `∂` applied first).
pub fn act_exact(m: &dyn DrModule, op: &ExactPoly, v: &ModuleVector) -> ModuleVector {
    let mut out = ModuleVector::new();
    for (key, c) in op.terms() {
        let mut w = v.clone();
        for (j, &e) in key.d.0.iter().enumerate() {
            for _ in 0..e {
                w = act_d(m, j, &w);
            }
        }
        for (j, &e) in key.x.0.iter().enumerate() {
            for _ in 0..e {
                w = act_x(m, j, &w);
            }
        }
        let s = c.to_laurent(m.precision());
        for (k2, c2) in w {
            accumulate(&mut out, k2, &c2.mul(&s));
        }
    }
    out
}

/// Integrable connection `∂_j + A_j` on a free module of finite rank over
/// the Tate algebra, with `∂_j e_g = Σ_h A_j[h][g] e_h`.
#[derive(Debug, Clone)]
pub struct FlatConnection {
    vars: usize,
    prec: usize,
    matrices: Vec<Vec<Vec<TateElement>>>,
}

impl FlatConnection {
    pub fn new(
        vars: usize,
        prec: usize,
        matrices: Vec<Vec<Vec<TateElement>>>,
    ) -> Result<Self, ComplexError> {
        if matrices.len() != vars || matrices.is_empty() {
            return Err(ComplexError::ShapeMismatch);
        }
        let rank = matrices[0].len();
        let square = matrices
            .iter()
            .all(|a| a.len() == rank && a.iter().all(|row| row.len() == rank));
        if rank == 0
            || !square
            || matrices
                .iter()
                .flatten()
                .flatten()
                .any(|f| f.vars() != vars)
        {
            return Err(ComplexError::ShapeMismatch);
        }
        let c = FlatConnection {
            vars,
            prec,
            matrices,
        };
        if !c.is_integrable() {
            return Err(ComplexError::NotIntegrable);
        }
        Ok(c)
    }

    /// `(O^rank, d)`.
    pub fn trivial(vars: usize, rank: usize, prec: usize) -> Self {
        let zero = vec![vec![TateElement::zero(vars); rank]; rank];
        FlatConnection {
            vars,
            prec,
            matrices: vec![zero; vars],
        }
    }

    /// One variable, rank one, `∇ = d/dx + a`.
    pub fn rank_one(a: TateElement, prec: usize) -> Self {
        FlatConnection {
            vars: 1,
            prec,
            matrices: vec![vec![vec![a]]],
        }
    }

    /// One variable, `∇ = d/dx + A`.
    pub fn from_matrix(a: Vec<Vec<TateElement>>, prec: usize) -> Result<Self, ComplexError> {
        Self::new(1, prec, vec![a])
    }

    pub fn rank(&self) -> usize {
        self.matrices[0].len()
    }

    pub fn matrix(&self, j: usize) -> &[Vec<TateElement>] {
        &self.matrices[j]
    }

    fn is_integrable(&self) -> bool {
        let r = self.rank();
        for i in 0..self.vars {
            for j in (i + 1)..self.vars {
                let (a, b) = (&self.matrices[i], &self.matrices[j]);
                for h in 0..r {
                    for g in 0..r {
                        let mut c = b[h][g].derivative(i).sub(&a[h][g].derivative(j));
                        for k in 0..r {
                            c = c.add(&a[h][k].mul(&b[k][g])).sub(&b[h][k].mul(&a[k][g]));
                        }
                        if !c.is_zero_at_precision() {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

impl DrModule for FlatConnection {
    fn var_count(&self) -> usize {
        self.vars
    }

    fn precision(&self) -> usize {
        self.prec
    }

    fn basis(&self, window: u32) -> Vec<BasisKey> {
        let mut out: Vec<BasisKey> = Monomial::up_to_degree(self.vars, window)
            .into_iter()
            .flat_map(|x| {
                (0..self.rank()).map(move |g| BasisKey {
                    x: x.clone(),
                    tail: Monomial(Vec::new()),
                    generator: g,
                })
            })
            .collect();
        out.sort();
        out
    }

    fn apply_d(&self, j: usize, key: &BasisKey) -> ModuleVector {
        let mut out = ModuleVector::new();
        let e = key.x.0[j];
        if e > 0 {
            let mut x = key.x.clone();
            x.0[j] -= 1;
            let k = BasisKey {
                x,
                tail: key.tail.clone(),
                generator: key.generator,
            };
            accumulate(&mut out, k, &LaurentScalar::from_int(e as i64, self.prec));
        }
        for (h, row) in self.matrices[j].iter().enumerate() {
            for (m, c) in row[key.generator].terms() {
                let k = BasisKey {
                    x: key.x.mul(&m),
                    tail: key.tail.clone(),
                    generator: h,
                };
                accumulate(&mut out, k, &c);
            }
        }
        out
    }

    fn apply_x(&self, j: usize, key: &BasisKey) -> ModuleVector {
        let mut x = key.x.clone();
        x.0[j] += 1;
        let k = BasisKey {
            x,
            tail: key.tail.clone(),
            generator: key.generator,
        };
        ModuleVector::from([(k, LaurentScalar::one(self.prec))])
    }
}

/// Direct image `M[∂_{r+1}, …, ∂_n]` along `{x_{r+1} = … = x_n = 0}`.
pub struct PushforwardModule<'a> {
    inner: &'a dyn DrModule,
    ambient: usize,
}

impl<'a> PushforwardModule<'a> {
    pub fn new(inner: &'a dyn DrModule, ambient: usize) -> Self {
        assert!(
            ambient > inner.var_count(),
            "ambient dimension must exceed the source"
        );
        PushforwardModule { inner, ambient }
    }

    fn codim(&self) -> usize {
        self.ambient - self.inner.var_count()
    }

    fn split(&self, key: &BasisKey) -> (BasisKey, Vec<u32>) {
        let cut = key.tail.0.len() - self.codim();
        let inner = BasisKey {
            x: key.x.clone(),
            tail: Monomial(key.tail.0[..cut].to_vec()),
            generator: key.generator,
        };
        (inner, key.tail.0[cut..].to_vec())
    }

    fn join(inner: BasisKey, outer: &[u32]) -> BasisKey {
        let mut tail = inner.tail.0;
        tail.extend_from_slice(outer);
        BasisKey {
            x: inner.x,
            tail: Monomial(tail),
            generator: inner.generator,
        }
    }

    fn lift(&self, v: ModuleVector, outer: &[u32]) -> ModuleVector {
        v.into_iter()
            .map(|(k, c)| (Self::join(k, outer), c))
            .collect()
    }
}

impl DrModule for PushforwardModule<'_> {
    fn var_count(&self) -> usize {
        self.ambient
    }

    fn precision(&self) -> usize {
        self.inner.precision()
    }

    fn basis(&self, window: u32) -> Vec<BasisKey> {
        let mut out = Vec::new();
        for k in self.inner.basis(window) {
            for t in Monomial::up_to_degree(self.codim(), window - k.degree()) {
                out.push(Self::join(k.clone(), &t.0));
            }
        }
        out.sort();
        out
    }

    fn apply_d(&self, j: usize, key: &BasisKey) -> ModuleVector {
        let (inner, mut outer) = self.split(key);
        let r = self.inner.var_count();
        if j < r {
            return self.lift(self.inner.apply_d(j, &inner), &outer);
        }
        outer[j - r] += 1;
        ModuleVector::from([(
            Self::join(inner, &outer),
            LaurentScalar::one(self.precision()),
        )])
    }

    fn apply_x(&self, j: usize, key: &BasisKey) -> ModuleVector {
        let (inner, mut outer) = self.split(key);
        let r = self.inner.var_count();
        if j < r {
            return self.lift(self.inner.apply_x(j, &inner), &outer);
        }
        let b = outer[j - r];
        if b == 0 {
            return ModuleVector::new();
        }
        outer[j - r] -= 1;
        let c = LaurentScalar::from_int(-(b as i64), self.precision());
        ModuleVector::from([(Self::join(inner, &outer), c)])
    }
}

/// Direct sum of cyclic modules `𝒟ₙ/I_g`, spanned by standard monomials.
#[derive(Debug, Clone)]
pub struct PresentedModule {
    vars: usize,
    prec: usize,
    bases: Vec<Vec<ExactPoly>>,
}

impl PresentedModule {
    /// Takes a Gröbner basis per summand.
    pub fn new(vars: usize, prec: usize, bases: Vec<Vec<ExactPoly>>) -> Self {
        PresentedModule { vars, prec, bases }
    }

    fn to_vector(&self, g: usize, p: &ExactPoly) -> ModuleVector {
        let nf = reduce(Algebra::Weyl, p, &self.bases[g]);
        let mut out = ModuleVector::new();
        for (k, c) in nf.terms() {
            let key = BasisKey {
                x: k.x.clone(),
                tail: k.d.clone(),
                generator: g,
            };
            accumulate(&mut out, key, &c.to_laurent(self.prec));
        }
        out
    }

    fn monomial(&self, key: &BasisKey) -> ExactPoly {
        ExactPoly::term(
            WeylKey {
                x: key.x.clone(),
                d: key.tail.clone(),
            },
            RatFunc::one(),
        )
    }
}

impl DrModule for PresentedModule {
    fn var_count(&self) -> usize {
        self.vars
    }

    fn precision(&self) -> usize {
        self.prec
    }

    fn basis(&self, window: u32) -> Vec<BasisKey> {
        let mut out = Vec::new();
        for (g, gb) in self.bases.iter().enumerate() {
            for k in standard_monomials(gb, self.vars, window, window) {
                if k.x.degree() + k.d.degree() <= window {
                    out.push(BasisKey {
                        x: k.x,
                        tail: k.d,
                        generator: g,
                    });
                }
            }
        }
        out.sort();
        out
    }

    fn apply_d(&self, j: usize, key: &BasisKey) -> ModuleVector {
        let p = ExactPoly::d(self.vars, j).weyl_mul(&self.monomial(key));
        self.to_vector(key.generator, &p)
    }

    fn apply_x(&self, j: usize, key: &BasisKey) -> ModuleVector {
        let p = ExactPoly::x(self.vars, j).weyl_mul(&self.monomial(key));
        self.to_vector(key.generator, &p)
    }
}

/// Basis element `m · dx_I` of a de Rham cochain space; `form` is the bitmask of `I`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CochainKey {
    pub key: BasisKey,
    pub form: u32,
}

pub type Cochain = BTreeMap<CochainKey, LaurentScalar>;

/// Bitmasks of `k`-element subsets of `{0, …, n-1}`, ascending.
pub fn forms(n: usize, k: usize) -> Vec<u32> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .collect()
}

/// Sign of `dx_j ∧ dx_I` relative to the sorted wedge.
pub fn wedge_sign(j: usize, mask: u32) -> i64 {
    if (mask & ((1 << j) - 1)).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `δ(m dx_I) = Σ_j ∂_j m · dx_j ∧ dx_I`.
pub fn differential(m: &dyn DrModule, c: &CochainKey) -> Cochain {
    let mut out = Cochain::new();
    let prec = m.precision();
    for j in 0..m.var_count() {
        if c.form & (1 << j) != 0 {
            continue;
        }
        let sign = LaurentScalar::from_int(wedge_sign(j, c.form), prec);
        for (k, v) in m.apply_d(j, &c.key) {
            add_cochain(
                &mut out,
                CochainKey {
                    key: k,
                    form: c.form | (1 << j),
                },
                &v.mul(&sign),
            );
        }
    }
    out
}

pub(crate) fn add_cochain(v: &mut Cochain, k: CochainKey, c: &LaurentScalar) {
    if c.is_exact_zero() {
        return;
    }
    match v.get_mut(&k) {
        Some(slot) => {
            *slot = slot.add(c);
            if slot.is_exact_zero() {
                v.remove(&k);
            }
        }
        None => {
            v.insert(k, c.clone());
        }
    }
}

pub fn apply_differential(m: &dyn DrModule, v: &Cochain) -> Cochain {
    let mut out = Cochain::new();
    for (k, c) in v {
        for (k2, c2) in differential(m, k) {
            add_cochain(&mut out, k2, &c.mul(&c2));
        }
    }
    out
}

/// Cochain basis in degree `k` with module degree at most `window`.
pub fn cochain_basis(m: &dyn DrModule, k: usize, window: u32) -> Vec<CochainKey> {
    let fs = forms(m.var_count(), k);
    let mut out: Vec<CochainKey> = m
        .basis(window)
        .into_iter()
        .flat_map(|key| {
            fs.iter().map(move |&form| CochainKey {
                key: key.clone(),
                form,
            })
        })
        .collect();
    out.sort();
    out
}

/// Matrix of `δ^k` on the window basis, with rows indexed by the window
/// basis of degree `k + 1` followed by every other key that is hit.
#[derive(Debug, Clone)]
pub struct DifferentialMatrix {
    pub matrix: SparseMatrix,
    pub columns: Vec<CochainKey>,
    pub rows: Vec<CochainKey>,
}

impl DifferentialMatrix {
    pub fn build(m: &dyn DrModule, k: usize, window: u32) -> Self {
        let columns = cochain_basis(m, k, window);
        let mut rows = cochain_basis(m, k + 1, window);
        let images: Vec<Cochain> = columns.iter().map(|c| differential(m, c)).collect();
        let mut index: HashMap<CochainKey, usize> = rows
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, k)| (k, i))
            .collect();
        let mut extra: Vec<CochainKey> = images
            .iter()
            .flat_map(|im| im.keys())
            .filter(|k| !index.contains_key(*k))
            .cloned()
            .collect();
        extra.sort();
        extra.dedup();
        for k in extra {
            index.insert(k.clone(), rows.len());
            rows.push(k);
        }
        let cols: Vec<Vec<(usize, LaurentScalar)>> = images
            .iter()
            .map(|im| im.iter().map(|(k, c)| (index[k], c.clone())).collect())
            .collect();
        let matrix = SparseMatrix::from_columns(rows.len(), &cols, m.precision() as i64);
        DifferentialMatrix {
            matrix,
            columns,
            rows,
        }
    }
}

/// The de Rham complex of a module restricted to a degree window.
#[derive(Debug, Clone)]
pub struct TruncatedComplex {
    pub vars: usize,
    pub precision: usize,
    pub window: u32,
    pub differentials: Vec<DifferentialMatrix>,
}

impl TruncatedComplex {
    /// Builds every `δ^k` and checks `δ^{k+1} δ^k = 0` on the window.
    pub fn build(m: &dyn DrModule, window: u32) -> Result<Self, ComplexError> {
        if m.basis(window).is_empty() {
            return Err(ComplexError::WindowTooSmall(window));
        }
        let n = m.var_count();
        let differentials: Vec<DifferentialMatrix> = (0..n)
            .map(|k| DifferentialMatrix::build(m, k, window))
            .collect();
        for k in 0..n.saturating_sub(1) {
            for c in &differentials[k].columns {
                let twice = apply_differential(m, &differential(m, c));
                if !twice.values().all(LaurentScalar::is_zero_at_precision) {
                    return Err(ComplexError::NotSquareZero(k));
                }
            }
        }
        Ok(TruncatedComplex {
            vars: n,
            precision: m.precision(),
            window,
            differentials,
        })
    }
}

/// Cohomology dimensions at one window and whether every rank was decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowCohomology {
    pub window: u32,
    pub dims: Vec<usize>,
    pub reliable: bool,
}

fn normalized(mut m: SparseMatrix) -> SparseMatrix {
    if let Some(v) = m.min_valuation() {
        m.shift(-v);
    }
    m
}

/// `H^k` at `window` as the kernel of `δ^k` on the window minus the part of
/// the window hit by `δ^{k-1}` from a larger source window.
pub fn cohomology_at_window(m: &dyn DrModule, window: u32) -> WindowCohomology {
    let n = m.var_count();
    let prec = m.precision();
    let margin = window.max(prec as u32);
    let mut dims = Vec::with_capacity(n + 1);
    let mut reliable = true;
    for k in 0..=n {
        let win_dim = cochain_basis(m, k, window).len();
        let nullity = if k == n {
            win_dim
        } else {
            let r = normalized(DifferentialMatrix::build(m, k, window).matrix).rank_report();
            reliable &= r.reliable;
            r.kernel_dim
        };
        let image = if k == 0 {
            0
        } else {
            let big = DifferentialMatrix::build(m, k - 1, window + margin);
            let mb = normalized(big.matrix);
            let r1 = mb.rank_report();
            let mut aug = SparseMatrix::new(mb.rows, mb.cols + win_dim, mb.precision_floor);
            for (r, row) in mb.data.iter().enumerate() {
                for (c, v) in row {
                    aug.add_to(r, *c, v);
                }
            }
            // the window basis of degree k occupies the first rows
            let window_rows = cochain_basis(m, k, window);
            let index: HashMap<&CochainKey, usize> =
                big.rows.iter().enumerate().map(|(i, k)| (k, i)).collect();
            for (i, key) in window_rows.iter().enumerate() {
                aug.add_to(index[key], mb.cols + i, &LaurentScalar::one(prec));
            }
            let r2 = aug.rank_report();
            reliable &= r1.reliable && r2.reliable;
            r1.rank + win_dim - r2.rank
        };
        dims.push(nullity.saturating_sub(image));
    }
    WindowCohomology {
        window,
        dims,
        reliable,
    }
}

/// Window-doubling options.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrOptions {
    pub start: u32,
    pub max: u32,
}

impl Default for DrOptions {
    fn default() -> Self {
        DrOptions { start: 8, max: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CohomologyReport {
    pub dims: Vec<usize>,
    pub t_precision: usize,
    pub degree_window: u32,
    pub stabilized: bool,
    pub reliable: bool,
    pub trajectory: Vec<(u32, Vec<usize>)>,
}

/// Doubles the window until two successive windows agree.
pub fn stabilized_cohomology(
    m: &dyn DrModule,
    opts: DrOptions,
) -> Result<CohomologyReport, ComplexError> {
    let mut w = opts.start.max(1);
    let mut trajectory: Vec<(u32, Vec<usize>)> = Vec::new();
    let mut reliable = true;
    loop {
        let c = cohomology_at_window(m, w);
        reliable &= c.reliable;
        let agreed = trajectory.last().is_some_and(|(_, d)| *d == c.dims);
        trajectory.push((w, c.dims.clone()));
        if agreed {
            return Ok(CohomologyReport {
                dims: c.dims,
                t_precision: m.precision(),
                degree_window: w,
                stabilized: true,
                reliable: reliable && c.reliable,
                trajectory,
            });
        }
        if w.saturating_mul(2) > opts.max {
            return Err(ComplexError::NoStabilization { trajectory });
        }
        w *= 2;
    }
}
