//! Named verification suites run by `tatedr verify`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::complex::{DrOptions, FlatConnection};
use crate::directimage::{chain_map_verify, dr_shift_check, homotopy_verify, EmbeddingData};
use crate::dmodule::{dr_cohomology, scalar_connection_table, verify_chi_transfer};
use crate::expr::{parse_operator, parse_tate};
use crate::groebner::{is_holonomic, FilteredPresentation};
use crate::scalars::{LaurentScalar, Valuation};
use crate::spencer::{build_spencer, hom_spencer_equals_dr, resolution_check_truncated};
use crate::tate::TateElement;
use crate::weyl::WeylOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Norms,
    Inversion,
    DrDisc,
    LambdaFamily,
    Holonomicity,
    DirectImage,
    Homotopy,
    Spencer,
    ChiTransfer,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Norms,
        Suite::Inversion,
        Suite::DrDisc,
        Suite::LambdaFamily,
        Suite::Holonomicity,
        Suite::DirectImage,
        Suite::Homotopy,
        Suite::Spencer,
        Suite::ChiTransfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Norms => "norms",
            Suite::Inversion => "inversion",
            Suite::DrDisc => "dr-disc",
            Suite::LambdaFamily => "lambda-family",
            Suite::Holonomicity => "holonomicity",
            Suite::DirectImage => "direct-image",
            Suite::Homotopy => "homotopy",
            Suite::Spencer => "spencer",
            Suite::ChiTransfer => "chi-transfer",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    /// The identity or table being checked.
    pub anchor: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub t_prec: usize,
    pub opts: DrOptions,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            t_prec: 8,
            opts: DrOptions::default(),
        }
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn push(
        &mut self,
        name: impl Into<String>,
        anchor: &str,
        passed: bool,
        detail: impl Into<String>,
    ) {
        self.0.push(Check {
            name: name.into(),
            anchor: anchor.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn push_result<T: fmt::Debug, E: fmt::Display>(
        &mut self,
        name: impl Into<String>,
        anchor: &str,
        r: Result<T, E>,
        ok: impl FnOnce(&T) -> bool,
    ) {
        match r {
            Ok(v) => {
                let passed = ok(&v);
                self.push(name, anchor, passed, format!("{v:?}"));
            }
            Err(e) => self.push(name, anchor, false, e.to_string()),
        }
    }
}

/// Rank-one connections `d/dx + A` used across suites.
pub fn connection_corpus(prec: usize) -> Vec<(&'static str, FlatConnection)> {
    [("O", "0"), ("pole", "-t^-1"), ("minus-t", "-t")]
        .into_iter()
        .map(|(name, a)| {
            (
                name,
                FlatConnection::rank_one(parse_tate(a, 1, prec).unwrap(), prec),
            )
        })
        .collect()
}

fn tate(src: &str, vars: usize, prec: usize) -> TateElement {
    parse_tate(src, vars, prec).expect("built-in expression")
}

fn operator(src: &str, vars: usize, prec: usize) -> WeylOperator {
    parse_operator(src, vars)
        .and_then(|e| e.to_operator(vars, prec))
        .expect("built-in expression")
}

fn norms(cfg: &VerifyConfig, c: &mut Checks) {
    let p = cfg.t_prec;
    let n = operator("t^-1*d1 + x1", 1, p).operator_norm();
    c.push(
        "operator norm",
        "|t^-1*d1 + x1| has log-norm -1",
        n == Valuation::Finite(-1),
        format!("{n:?}"),
    );
    let samples = [
        "1 + t*x1",
        "t^-2*x1^3 - t*x1 + 3",
        "t^3 + x1*x2",
        "1/2*t^-1 + x2^2",
        "-t",
    ];
    let elems: Vec<TateElement> = samples.iter().map(|s| tate(s, 2, p)).collect();
    for (i, f) in elems.iter().enumerate() {
        for g in &elems[i..] {
            let (vf, vg) = (f.gauss_norm().lower_bound(), g.gauss_norm().lower_bound());
            let prod = f.mul(g).gauss_norm();
            c.push(
                format!("multiplicative ({f}) * ({g})"),
                "v(fg) = v(f) + v(g)",
                prod == Valuation::Finite(vf + vg),
                format!("{prod:?}"),
            );
            let sum = f.add(g).gauss_norm().lower_bound();
            c.push(
                format!("ultrametric ({f}) + ({g})"),
                "v(f+g) >= min(v(f), v(g))",
                sum >= vf.min(vg),
                sum.to_string(),
            );
        }
    }
}

fn inversion(cfg: &VerifyConfig, c: &mut Checks) {
    let p = cfg.t_prec;
    let u = operator("1 - t*d1", 1, p);
    let expected = (0..p).fold(WeylOperator::zero(1, p), |acc, k| {
        acc.add(
            &WeylOperator::scalar(1, &LaurentScalar::t_pow(k as i64, p), p)
                .mul(&WeylOperator::d(1, 0, p).pow(k as u32)),
        )
    });
    match u.invert_unit() {
        Ok(inv) => {
            c.push(
                "series",
                "(1 - t*d1)^-1 = sum_{k<p} t^k d1^k",
                inv.eq_at_precision(&expected),
                inv.to_string(),
            );
            let one = WeylOperator::one(1, p);
            c.push(
                "left inverse",
                "inverse * u = 1",
                inv.mul(&u).eq_at_precision(&one),
                inv.mul(&u).to_string(),
            );
            c.push(
                "right inverse",
                "u * inverse = 1",
                u.mul(&inv).eq_at_precision(&one),
                u.mul(&inv).to_string(),
            );
        }
        Err(e) => c.push("series", "(1 - t*d1)^-1 exists", false, e.to_string()),
    }
    let d = operator("d1", 1, p);
    c.push("non-unit", "d1 is not a unit", d.invert_unit().is_err(), "");
}

fn dr_disc(cfg: &VerifyConfig, c: &mut Checks) {
    let p = cfg.t_prec;
    let cases = [
        ("O", "0", (1, 0)),
        ("pole", "-t^-1", (0, 0)),
        ("minus-x", "-x1", (0, 1)),
    ];
    for (name, a, want) in cases {
        let m = FlatConnection::rank_one(tate(a, 1, p), p);
        c.push_result(
            name,
            &format!("(h0, h1) of d/dx + ({a}) = {want:?}"),
            dr_cohomology(&m, cfg.opts),
            |r| (r.h0, r.h1) == want && r.stabilized,
        );
    }
}

fn lambda_family(cfg: &VerifyConfig, c: &mut Checks) {
    let p = cfg.t_prec;
    for lambda in ["0", "t", "t^2", "1", "t^-1"] {
        let l = tate(lambda, 1, p);
        let want = scalar_connection_table(&l.constant_term());
        let m = FlatConnection::rank_one(l, p);
        c.push_result(
            format!("lambda = {lambda}"),
            &format!("(h0, h1) = {want:?}"),
            dr_cohomology(&m, cfg.opts),
            |r| (r.h0, r.h1) == want,
        );
    }
}

fn presentation(rels: &[&str], vars: usize) -> FilteredPresentation {
    let exact = rels
        .iter()
        .map(|r| {
            parse_operator(r, vars)
                .and_then(|e| e.to_exact(vars))
                .unwrap()
        })
        .collect();
    FilteredPresentation::cyclic(vars, exact)
}

fn holonomicity(_: &VerifyConfig, c: &mut Checks) {
    let cases: [(&[&str], Option<usize>, bool); 3] = [
        (&["d1", "x2"], Some(2), true),
        (&["1 - t*d1"], Some(3), false),
        (&["d1", "d2"], Some(2), true),
    ];
    for (rels, dim, hol) in cases {
        let r = is_holonomic(&presentation(rels, 2));
        c.push(
            format!("D2/({})", rels.join(", ")),
            &format!("charDimension {dim:?}, holonomic {hol}"),
            r.char_dimension == dim && r.holonomic == hol,
            format!("{r:?}"),
        );
    }
}

fn direct_image(cfg: &VerifyConfig, c: &mut Checks) {
    let e = EmbeddingData { r: 1, n: 2 };
    for (name, m) in connection_corpus(cfg.t_prec) {
        c.push_result(
            format!("shift {name}"),
            "H^i(source) = H^{i+1}(direct image)",
            dr_shift_check(&m, e, cfg.opts),
            |r| r.equal,
        );
        c.push_result(
            format!("chain map {name}"),
            "f d = d f and f injective",
            chain_map_verify(&m, e, 8),
            |r| r.commutes && r.injective,
        );
    }
}

fn homotopy(_: &VerifyConfig, c: &mut Checks) {
    let e = EmbeddingData { r: 1, n: 2 };
    for (name, m) in connection_corpus(6) {
        c.push_result(
            format!("homotopy {name}"),
            "dh + hd = Id on the cokernel",
            homotopy_verify(&m, e, 6),
            |r| r.identity_holds && r.sign_check,
        );
    }
}

fn spencer(cfg: &VerifyConfig, c: &mut Checks) {
    for n in 1..=3 {
        c.push_result(
            format!("compositions n = {n}"),
            "d o d = 0 in the Weyl algebra",
            build_spencer(n),
            |s| s.compositions_vanish(),
        );
    }
    let p = cfg.t_prec;
    let o2 = FlatConnection::trivial(2, 1, p);
    for (name, m) in connection_corpus(p) {
        c.push_result(
            format!("hom = de Rham {name}"),
            "Hom(Sp, M) = DR(M)",
            hom_spencer_equals_dr(&m, 6),
            |r| r.equal,
        );
    }
    c.push_result(
        "hom = de Rham O on the 2-disc",
        "Hom(Sp, M) = DR(M)",
        hom_spencer_equals_dr(&o2, 5),
        |r| r.equal,
    );
    for n in 1..=2 {
        c.push_result(
            format!("resolution n = {n}"),
            "Sp -> O -> 0 exact",
            resolution_check_truncated(n, 5),
            |r| r.exact && r.augmentation_surjective,
        );
    }
}

fn chi_transfer(cfg: &VerifyConfig, c: &mut Checks) {
    let p = cfg.t_prec;
    for (a, chi) in [("0", 1), ("-x1", -1), ("-t", 1)] {
        let m = FlatConnection::rank_one(tate(a, 1, p), p);
        c.push_result(
            format!("A = {a}"),
            &format!("chi_K = chi_k = {chi}"),
            verify_chi_transfer(&m, cfg.opts),
            |r| r.equal && r.chi_generic == chi,
        );
    }
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> SuiteReport {
    let mut c = Checks(Vec::new());
    match suite {
        Suite::Norms => norms(cfg, &mut c),
        Suite::Inversion => inversion(cfg, &mut c),
        Suite::DrDisc => dr_disc(cfg, &mut c),
        Suite::LambdaFamily => lambda_family(cfg, &mut c),
        Suite::Holonomicity => holonomicity(cfg, &mut c),
        Suite::DirectImage => direct_image(cfg, &mut c),
        Suite::Homotopy => homotopy(cfg, &mut c),
        Suite::Spencer => spencer(cfg, &mut c),
        Suite::ChiTransfer => chi_transfer(cfg, &mut c),
    }
    let passed = c.0.iter().all(|x| x.passed);
    SuiteReport {
        suite,
        checks: c.0,
        passed,
    }
}

/// Runs the suites on separate threads; reports come back in input order.
pub fn run_suites(suites: &[Suite], cfg: &VerifyConfig) -> Vec<SuiteReport> {
    std::thread::scope(|s| {
        let handles: Vec<_> = suites
            .iter()
            .map(|&x| s.spawn(move || run_suite(x, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn every_suite_passes() {
        for r in run_suites(&Suite::ALL, &VerifyConfig::default()) {
            assert!(r.passed, "{r:#?}");
        }
    }
}
