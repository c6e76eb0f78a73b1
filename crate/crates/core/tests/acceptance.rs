//! Acceptance gate: one line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tatedr::complex::{
    cochain_basis, differential, DifferentialMatrix, DrModule, DrOptions, FlatConnection,
    PushforwardModule, TruncatedComplex,
};
use tatedr::directimage::{dr_shift_check, homotopy_verify, EmbeddingData};
use tatedr::dmodule::{dr_cohomology, verify_chi_transfer};
use tatedr::expr::{parse_operator, parse_tate};
use tatedr::groebner::{is_holonomic, FilteredPresentation};
use tatedr::linalg::SparseMatrix;
use tatedr::monomial::Monomial;
use tatedr::scalars::{LaurentScalar, Rational, Valuation};
use tatedr::spencer::hom_spencer_equals_dr;
use tatedr::tate::TateElement;
use tatedr::weyl::WeylOperator;

const P: usize = 8;
const CASES: usize = 200;
const SEED: u64 = 0x7a7e_d0d0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn tate(src: &str, vars: usize, prec: usize) -> TateElement {
    parse_tate(src, vars, prec).unwrap()
}

fn op(src: &str, vars: usize, prec: usize) -> WeylOperator {
    parse_operator(src, vars)
        .unwrap()
        .to_operator(vars, prec)
        .unwrap()
}

fn rank_one(a: &str, prec: usize) -> FlatConnection {
    FlatConnection::rank_one(tate(a, 1, prec), prec)
}

fn dims(m: &FlatConnection) -> Result<(usize, usize, u32, bool), String> {
    let r = dr_cohomology(m, DrOptions::default()).map_err(|e| e.to_string())?;
    Ok((r.h0, r.h1, r.degree_window, r.stabilized))
}

fn inversion() -> Outcome {
    let start = Instant::now();
    let u = op("1 - t*d1", 1, P);
    let inv = u.invert_unit().map_err(|e| e.to_string())?;
    let one = WeylOperator::one(1, P);
    let back = inv.mul(&u).eq_at_precision(&one) && u.mul(&inv).eq_at_precision(&one);
    let elapsed = start.elapsed();
    // coefficient of d1^k is t^k exactly, and nothing else survives
    for k in 0..P as u32 {
        let c = inv.coefficient(&Monomial(vec![k]));
        let want = TateElement::from_scalar(1, &LaurentScalar::t_pow(k as i64, P));
        ensure(
            c.eq_at_precision(&want),
            format!("coefficient of d1^{k} is {c}"),
        )?;
    }
    ensure(
        inv.terms().all(|(a, _)| a.0[0] < P as u32),
        "terms beyond order p - 1",
    )?;
    ensure(back, "product is not 1 mod t^8")?;
    ensure(elapsed.as_secs_f64() < 0.1, format!("took {elapsed:?}"))?;
    Ok(format!("{inv} in {:.2} ms", elapsed.as_secs_f64() * 1e3))
}

fn disc() -> Outcome {
    let (h0, h1, w, st) = dims(&FlatConnection::trivial(1, 1, P))?;
    ensure(
        (h0, h1) == (1, 0) && st && w <= 32,
        format!("({h0}, {h1}) at window {w}, stabilized {st}"),
    )?;
    Ok(format!("(1, 0) stabilized at window {w}"))
}

fn pole() -> Outcome {
    let (h0, h1, w, st) = dims(&rank_one("-t^-1", P))?;
    ensure(
        (h0, h1) == (0, 0) && st,
        format!("({h0}, {h1}), stabilized {st}"),
    )?;
    Ok(format!("(0, 0) stabilized at window {w}"))
}

/// `f' + λ f = 0` is solved by `exp(-λx)`, which lies in the Tate algebra
/// exactly when its coefficients `λ^n / n!` tend to zero.
fn kernel_oracle(lambda: &LaurentScalar) -> usize {
    match lambda.valuation() {
        Valuation::Infinite => 1,
        v => {
            let v = v.lower_bound();
            let vals: Vec<i64> = (1..=12).map(|n| n * v).collect();
            usize::from(vals.windows(2).all(|w| w[1] > w[0]))
        }
    }
}

/// Builds a preimage of `x^m` under `d/dx + λ` and checks it.
fn preimage_exists(lambda: &LaurentScalar, m: u32) -> bool {
    let g = TateElement::monomial(1, &LaurentScalar::one(P), Monomial(vec![m]));
    let l = TateElement::from_scalar(1, lambda);
    let f = if lambda.valuation().lower_bound() <= 0 && !lambda.is_exact_zero() {
        // Σ_k (-1)^k g^(k) / λ^{k+1}, a polynomial
        let inv = lambda.invert().unwrap();
        let mut term = g.scale_by(&inv);
        let mut f = TateElement::zero(1);
        for _ in 0..=m {
            f = f.add(&term);
            term = term.derivative(0).scale_by(&inv).neg();
        }
        f
    } else {
        // Σ_k (-λ)^k I^{k+1} g, convergent for |λ| < 1
        let mut term = g.integrate(0);
        let mut f = TateElement::zero(1);
        for _ in 0..=2 * P {
            f = f.add(&term);
            term = term.mul(&l).neg().integrate(0);
        }
        f
    };
    let residual = f.derivative(0).add(&l.mul(&f)).sub(&g);
    residual.gauss_norm().lower_bound() >= P as i64
}

fn lambda_family() -> Outcome {
    let table = [
        ("0", (1, 0)),
        ("t", (1, 0)),
        ("t^2", (1, 0)),
        ("1", (0, 0)),
        ("t^-1", (0, 0)),
    ];
    let mut got = Vec::new();
    for (src, want) in table {
        let l = tate(src, 1, P).constant_term();
        let derived = (
            kernel_oracle(&l),
            if (0..6).all(|m| preimage_exists(&l, m)) {
                0
            } else {
                1
            },
        );
        ensure(
            derived == want,
            format!("oracle gives {derived:?} for lambda = {src}"),
        )?;
        let (h0, h1, _, _) = dims(&rank_one(src, P))?;
        ensure(
            (h0, h1) == want,
            format!("lambda = {src}: ({h0}, {h1}), expected {want:?}"),
        )?;
        got.push(format!("{src}:({h0},{h1})"));
    }
    Ok(got.join(" "))
}

fn holonomicity() -> Outcome {
    let pres = |rels: &[&str]| {
        let ps = rels
            .iter()
            .map(|r| parse_operator(r, 2).unwrap().to_exact(2).unwrap())
            .collect();
        is_holonomic(&FilteredPresentation::cyclic(2, ps))
    };
    let a = pres(&["d1", "x2"]);
    let b = pres(&["1 - t*d1"]);
    ensure(a.holonomic && a.char_dimension == Some(2), format!("{a:?}"))?;
    ensure(
        !b.holonomic && b.char_dimension == Some(3),
        format!("{b:?}"),
    )?;
    Ok("D2/(d1, x2): dim 2 holonomic; D2/(1 - t*d1): dim 3 not holonomic".into())
}

fn corpus(prec: usize) -> Vec<(&'static str, FlatConnection, (usize, usize))> {
    vec![
        ("O", FlatConnection::trivial(1, 1, prec), (1, 0)),
        ("pole", rank_one("-t^-1", prec), (0, 0)),
        ("A = -t", rank_one("-t", prec), (1, 0)),
    ]
}

fn shift() -> Outcome {
    let e = EmbeddingData::new(1, 2).unwrap();
    let mut out = Vec::new();
    for (name, m, want) in corpus(P) {
        let r = dr_shift_check(&m, e, DrOptions::default()).map_err(|e| e.to_string())?;
        ensure(
            r.equal && r.source == vec![want.0, want.1],
            format!("{name}: {r:?}"),
        )?;
        out.push(format!("{name}:{:?}->{:?}", r.source, r.target));
    }
    Ok(out.join(" "))
}

fn homotopy() -> Outcome {
    let e = EmbeddingData::new(1, 2).unwrap();
    let mut checked = 0;
    for (name, m, _) in corpus(6) {
        let r = homotopy_verify(&m, e, 6).map_err(|e| e.to_string())?;
        ensure(r.identity_holds && r.sign_check, format!("{name}: {r:?}"))?;
        checked += r.degrees.iter().map(|d| d.checked).sum::<usize>();
    }
    Ok(format!("{checked} cokernel basis elements"))
}

fn spencer() -> Outcome {
    let pole = rank_one("-t^-1", P);
    let o1 = FlatConnection::trivial(1, 1, P);
    let o2 = FlatConnection::trivial(2, 1, P);
    // gradient of -t*x1*x2, hence integrable
    let two_var = FlatConnection::new(
        2,
        P,
        vec![
            vec![vec![tate("-t*x2", 2, P)]],
            vec![vec![tate("-t*x1", 2, P)]],
        ],
    )
    .map_err(|e| e.to_string())?;
    let push = PushforwardModule::new(&pole, 2);
    let cases: [(&str, &dyn DrModule); 5] = [
        ("O on the 1-disc", &o1),
        ("pole", &pole),
        ("O on the 2-disc", &o2),
        ("2-disc connection", &two_var),
        ("image of the pole connection", &push),
    ];
    for (name, m) in cases {
        let r = hom_spencer_equals_dr(m, 5).map_err(|e| e.to_string())?;
        ensure(r.equal, format!("{name}: {r:?}"))?;
    }
    Ok("n = 1, 2 on O and connections".into())
}

fn chi_transfer() -> Outcome {
    let mut out = Vec::new();
    for (a, chi) in [("0", 1), ("-x1", -1), ("-t", 1)] {
        let r = verify_chi_transfer(&rank_one(a, P), DrOptions::default())
            .map_err(|e| e.to_string())?;
        ensure(
            r.equal && r.chi_generic == chi && r.chi_residue == chi,
            format!("A = {a}: {r:?}"),
        )?;
        out.push(format!("{a}:{chi}"));
    }
    Ok(out.join(" "))
}

fn random_tate(rng: &mut ChaCha8Rng, vars: usize) -> TateElement {
    let n = rng.gen_range(1..5);
    TateElement::from_terms(
        vars,
        (0..n).map(|_| {
            let e: Vec<u32> = (0..vars).map(|_| rng.gen_range(0..3)).collect();
            let mut q = rng.gen_range(-4i64..5);
            if q == 0 {
                q = 1;
            }
            (
                Monomial(e),
                LaurentScalar::monomial(Rational::from_integer(q.into()), rng.gen_range(-2..3), P),
            )
        }),
    )
}

fn random_weyl(rng: &mut ChaCha8Rng, vars: usize) -> WeylOperator {
    let n = rng.gen_range(1..4);
    let terms: Vec<(Monomial, TateElement)> = (0..n)
        .map(|_| {
            (
                Monomial((0..vars).map(|_| rng.gen_range(0..3)).collect()),
                random_tate(rng, vars),
            )
        })
        .collect();
    WeylOperator::from_terms(vars, P, terms)
}

/// Exact rank of a matrix with rational entries.
fn rational_rank(mut rows: Vec<Vec<Rational>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][c] != Rational::from_integer(0.into()))
        else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank][c].clone();
        for r in 0..rows.len() {
            if r != rank {
                let f = &rows[r][c] / &pivot;
                for k in 0..cols {
                    let sub = &f * &rows[rank][k];
                    rows[r][k] -= sub;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut counts = [0usize; 6];
    for _ in 0..CASES {
        let (f, g) = (random_tate(&mut rng, 2), random_tate(&mut rng, 2));
        if f.is_zero_at_precision() || g.is_zero_at_precision() {
            continue;
        }
        let (vf, vg) = (f.gauss_norm().lower_bound(), g.gauss_norm().lower_bound());
        ensure(
            f.mul(&g).gauss_norm() == Valuation::Finite(vf + vg),
            format!("multiplicativity: {f} * {g}"),
        )?;
        let s = f.add(&g).gauss_norm().lower_bound();
        ensure(
            s >= vf.min(vg) && (vf == vg || s == vf.min(vg)),
            format!("ultrametric: {f} + {g}"),
        )?;
        counts[0] += 1;
    }
    for _ in 0..CASES {
        let (p, q) = (random_weyl(&mut rng, 2), random_weyl(&mut rng, 2));
        ensure(
            p.transpose().transpose().eq_at_precision(&p),
            format!("involution: {p}"),
        )?;
        ensure(
            p.mul(&q)
                .transpose()
                .eq_at_precision(&q.transpose().mul(&p.transpose())),
            format!("anti: {p}, {q}"),
        )?;
        counts[1] += 1;
    }
    for _ in 0..CASES {
        let (f, g) = (random_tate(&mut rng, 2), random_tate(&mut rng, 2));
        let i = rng.gen_range(0..2);
        let lhs = f.mul(&g).derivative(i);
        let rhs = f.derivative(i).mul(&g).add(&f.mul(&g.derivative(i)));
        ensure(lhs.eq_at_precision(&rhs), format!("Leibniz: {f}, {g}"))?;
        counts[2] += 1;
        ensure(
            f.integrate(i).derivative(i).eq_at_precision(&f),
            format!("integrate: {f}"),
        )?;
        counts[3] += 1;
    }
    for case in 0..CASES {
        let a = random_tate(&mut rng, 1);
        let m = FlatConnection::rank_one(a, P);
        let push = PushforwardModule::new(&m, 2);
        let module: &dyn DrModule = if case % 2 == 0 { &m } else { &push };
        let window = 3;
        ensure(
            TruncatedComplex::build(module, window).is_ok(),
            "complex rejected",
        )?;
        for k in 0..module.var_count().saturating_sub(1) {
            for c in cochain_basis(module, k, window) {
                let mut acc = std::collections::BTreeMap::new();
                for (key, v) in differential(module, &c) {
                    for (k2, w) in differential(module, &key) {
                        let e: &mut LaurentScalar =
                            acc.entry(k2).or_insert_with(LaurentScalar::zero);
                        *e = e.add(&v.mul(&w));
                    }
                }
                ensure(
                    acc.values().all(LaurentScalar::is_zero_at_precision),
                    "d^2 != 0",
                )?;
            }
        }
        counts[4] += 1;
        for k in 0..module.var_count() {
            let dm = DifferentialMatrix::build(module, k, window);
            let r = dm.matrix.rank_report();
            ensure(
                r.rank + r.kernel_dim == dm.matrix.cols
                    && r.rank + r.cokernel_dim == dm.matrix.rows,
                "rank-nullity",
            )?;
        }
    }
    for _ in 0..CASES {
        let rows = rng.gen_range(1..7);
        let cols = rng.gen_range(1..7);
        let entries: Vec<Vec<Rational>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        Rational::from_integer(
                            if rng.gen_bool(0.4) {
                                rng.gen_range(-3i64..4)
                            } else {
                                0
                            }
                            .into(),
                        )
                    })
                    .collect()
            })
            .collect();
        let columns: Vec<Vec<(usize, LaurentScalar)>> = (0..cols)
            .map(|c| {
                (0..rows)
                    .map(|r| (r, LaurentScalar::from_rational(entries[r][c].clone(), P)))
                    .collect()
            })
            .collect();
        let m = SparseMatrix::from_columns(rows, &columns, P as i64);
        let r = m.rank_report();
        ensure(
            r.rank + r.kernel_dim == cols && r.rank + r.cokernel_dim == rows,
            "rank-nullity",
        )?;
        ensure(
            r.rank == rational_rank(entries),
            "rank disagrees with exact elimination",
        )?;
        counts[5] += 1;
    }
    ensure(
        counts.iter().all(|&c| c >= CASES * 9 / 10),
        format!("too few effective cases {counts:?}"),
    )?;
    Ok(format!("cases per property {counts:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("inversion of 1 - t*d1", inversion),
        ("disc cohomology", disc),
        ("vanishing for A = -t^-1", pole),
        ("lambda family", lambda_family),
        ("holonomicity", holonomicity),
        ("direct image shift", shift),
        ("homotopy identity", homotopy),
        ("Spencer and de Rham", spencer),
        ("Euler characteristic transfer", chi_transfer),
        ("property suites", properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {} {name} ({secs:.3}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} {name} ({secs:.3}s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
