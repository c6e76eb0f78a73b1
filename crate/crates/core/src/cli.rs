//! Command-line front end: argument parsing, dispatch and JSON reports.

use std::ffi::OsString;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::complex::{DrModule, DrOptions, FlatConnection, PresentedModule};
use crate::directimage::{
    chain_map_verify, dr_shift_check, homotopy_verify, pushforward_presentation, EmbeddingData,
};
use crate::dmodule::{cyclic_to_connection, dr_cohomology, CyclicModule, DModuleError};
use crate::expr::{parse_operator, parse_tate, Expr, ExprError};
use crate::groebner::{is_holonomic, left_buchberger, ExactPoly, FilteredPresentation};
use crate::scalars::Valuation;
use crate::verify::{run_suites, Suite, VerifyConfig};
use crate::weyl::WeylOperator;

#[derive(Debug, Parser)]
#[command(
    name = "tatedr",
    version,
    about = "Weyl operators over Tate algebras and truncated de Rham cohomology"
)]
struct Cli {
    /// Relative t-adic precision.
    #[arg(long, global = true, default_value_t = 8)]
    t_prec: usize,
    /// Largest degree window tried before giving up on stabilization.
    #[arg(long, global = true, default_value_t = 64)]
    x_deg_max: u32,
    /// First degree window.
    #[arg(long, global = true, default_value_t = 8)]
    x_deg_start: u32,
    /// Number of variables; inferred from the expression when absent.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Print the run report as compact JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Print the run report as indented JSON.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ImageCheck {
    Shift,
    Homotopy,
    Chainmap,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normal form of an operator.
    Eval { expr: String },
    /// Log of the operator norm, as a power of t.
    Norm { expr: String },
    /// Formal adjoint.
    Transpose { expr: String },
    /// Inverse of a unit of the completed Weyl algebra.
    Invert { expr: String },
    /// Applies an operator to a function.
    Apply {
        expr: String,
        #[arg(long)]
        to: String,
    },
    /// De Rham cohomology of d/dx + A, or of a cyclic module D/DP.
    Dr {
        #[arg(
            long,
            allow_hyphen_values = true,
            required_unless_present = "relation",
            conflicts_with = "relation"
        )]
        connection: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        relation: Option<String>,
    },
    /// Holonomicity of a cyclic module given by its relations.
    Holonomic {
        #[arg(required = true)]
        relations: Vec<String>,
    },
    /// Dimension of the characteristic variety.
    CharDim {
        #[arg(required = true)]
        relations: Vec<String>,
    },
    /// Direct image along the vanishing of the last coordinates.
    DirectImage {
        #[arg(long, allow_hyphen_values = true)]
        relation: String,
        #[arg(long)]
        ambient_dim: usize,
        #[arg(long, value_enum)]
        verify: Option<ImageCheck>,
    },
    /// Runs a verification suite, or all of them.
    Verify {
        #[arg(value_parser = parse_selector)]
        selector: Selector,
    },
}

#[derive(Debug, Clone)]
enum Selector {
    All,
    One(Suite),
}

fn parse_selector(s: &str) -> Result<Selector, String> {
    if s == "all" {
        return Ok(Selector::All);
    }
    s.parse().map(Selector::One)
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct DegreeWindows {
    start: u32,
    max: u32,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    command: Vec<String>,
    t_precision: usize,
    degree_windows: DegreeWindows,
    status: &'static str,
    exit_code: i32,
    summary: String,
    result: Value,
    warnings: Vec<String>,
}

/// What a run printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Usage(String),
    Math { message: String, result: Value },
}

impl From<ExprError> for Failure {
    fn from(e: ExprError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn math(message: impl ToString) -> Failure {
    Failure::Math {
        message: message.to_string(),
        result: Value::Null,
    }
}

struct Success {
    summary: String,
    result: Value,
    warnings: Vec<String>,
}

impl Success {
    fn new(summary: impl Into<String>, result: Value) -> Self {
        Success {
            summary: summary.into(),
            result,
            warnings: Vec::new(),
        }
    }
}

struct Ctx {
    prec: usize,
    dim: Option<usize>,
    opts: DrOptions,
}

impl Ctx {
    fn vars_for(&self, sources: &[&str]) -> Result<usize, Failure> {
        if let Some(d) = self.dim {
            return Ok(d);
        }
        let mut n = 1;
        for s in sources {
            n = n.max(parse_operator(s, usize::MAX)?.max_index());
        }
        Ok(n)
    }

    fn parse(&self, src: &str, vars: usize) -> Result<Expr, Failure> {
        Ok(parse_operator(src, vars)?)
    }

    fn operator(&self, src: &str) -> Result<WeylOperator, Failure> {
        let n = self.vars_for(&[src])?;
        Ok(self.parse(src, n)?.to_operator(n, self.prec)?)
    }

    fn exact(&self, sources: &[String]) -> Result<(usize, Vec<ExactPoly>), Failure> {
        let refs: Vec<&str> = sources.iter().map(String::as_str).collect();
        let n = self.vars_for(&refs)?;
        let rels = refs
            .iter()
            .map(|s| Ok(self.parse(s, n)?.to_exact(n)?))
            .collect::<Result<_, Failure>>()?;
        Ok((n, rels))
    }
}

fn operator_result(w: &WeylOperator) -> Value {
    json!({ "normalForm": w.to_string(), "operator": w })
}

fn log_norm(v: Valuation) -> (Value, Option<String>) {
    match v {
        Valuation::Finite(k) => (json!(k), None),
        Valuation::AtLeast(b) => (
            Value::Null,
            Some(format!(
                "operator is zero at this precision; log-norm at least {b}"
            )),
        ),
        Valuation::Infinite => (Value::Null, None),
    }
}

fn source_module(
    ctx: &Ctx,
    relation: &str,
) -> Result<(Box<dyn DrModule>, ExactPoly, usize), Failure> {
    let r = ctx.vars_for(&[relation])?;
    let e = ctx.parse(relation, r)?;
    let exact = e.to_exact(r)?;
    if r == 1 {
        let op = e.to_operator(1, ctx.prec)?;
        if let Ok(c) = CyclicModule::new(op).and_then(|m| cyclic_to_connection(&m)) {
            return Ok((Box::new(c), exact, r));
        }
    }
    let gb = left_buchberger(std::slice::from_ref(&exact));
    Ok((
        Box::new(PresentedModule::new(r, ctx.prec, vec![gb])),
        exact,
        r,
    ))
}

fn dispatch(cmd: &Command, ctx: &Ctx) -> Result<Success, Failure> {
    match cmd {
        Command::Eval { expr } => {
            let w = ctx.operator(expr)?;
            Ok(Success::new(w.to_string(), operator_result(&w)))
        }
        Command::Norm { expr } => {
            let w = ctx.operator(expr)?;
            let (v, warn) = log_norm(w.operator_norm());
            let mut s = Success::new(
                v.to_string(),
                json!({ "logNorm": v, "normalForm": w.to_string() }),
            );
            s.warnings.extend(warn);
            Ok(s)
        }
        Command::Transpose { expr } => {
            let w = ctx.operator(expr)?.transpose();
            Ok(Success::new(w.to_string(), operator_result(&w)))
        }
        Command::Invert { expr } => {
            let w = ctx.operator(expr)?;
            let inv = w.invert_unit().map_err(math)?;
            let one = WeylOperator::one(w.vars(), ctx.prec);
            let checked = inv.mul(&w).eq_at_precision(&one) && w.mul(&inv).eq_at_precision(&one);
            let mut result = operator_result(&inv);
            result["multipliesBackToOne"] = json!(checked);
            Ok(Success::new(inv.to_string(), result))
        }
        Command::Apply { expr, to } => {
            let n = ctx.vars_for(&[expr, to])?;
            let w = ctx.parse(expr, n)?.to_operator(n, ctx.prec)?;
            let f = parse_tate(to, n, ctx.prec)?;
            let g = w.apply(&f);
            Ok(Success::new(
                g.to_string(),
                json!({ "value": g.to_string(), "element": g.to_json() }),
            ))
        }
        Command::Dr {
            connection,
            relation,
        } => {
            let conn = match (connection, relation) {
                (Some(a), _) => {
                    if ctx.dim.is_some_and(|d| d != 1) {
                        return Err(Failure::Usage(
                            "connections are supported in one variable".into(),
                        ));
                    }
                    FlatConnection::rank_one(parse_tate(a, 1, ctx.prec)?, ctx.prec)
                }
                (None, Some(p)) => {
                    let op = ctx.parse(p, 1)?.to_operator(1, ctx.prec)?;
                    let m = CyclicModule::new(op).map_err(math)?;
                    cyclic_to_connection(&m).map_err(math)?
                }
                (None, None) => unreachable!("enforced by the argument parser"),
            };
            match dr_cohomology(&conn, ctx.opts) {
                Ok(r) => {
                    let mut s = Success::new(format!("h0 = {}, h1 = {}", r.h0, r.h1), json!(r));
                    if !r.reliable {
                        s.warnings
                            .push("some pivots were not decided at this precision".into());
                    }
                    Ok(s)
                }
                Err(DModuleError::Complex(e)) => Err(Failure::Math {
                    message: e.to_string(),
                    result: json!({ "error": e.to_string() }),
                }),
                Err(e) => Err(math(e)),
            }
        }
        Command::Holonomic { relations } | Command::CharDim { relations } => {
            let (n, rels) = ctx.exact(relations)?;
            let r = is_holonomic(&FilteredPresentation::cyclic(n, rels));
            let dim = r
                .char_dimension
                .map_or("none".to_string(), |d| d.to_string());
            let summary = match cmd {
                Command::Holonomic { .. } => {
                    format!("holonomic = {}, charDimension = {dim}", r.holonomic)
                }
                _ => dim,
            };
            Ok(Success::new(summary, json!(r)))
        }
        Command::DirectImage {
            relation,
            ambient_dim,
            verify,
        } => {
            let (m, exact, r) = source_module(ctx, relation)?;
            let e =
                EmbeddingData::new(r, *ambient_dim).map_err(|e| Failure::Usage(e.to_string()))?;
            let push = pushforward_presentation(&FilteredPresentation::cyclic(r, vec![exact]), e);
            let rels: Vec<String> = push.summands[0].iter().map(ToString::to_string).collect();
            let hol = is_holonomic(&push);
            let mut result = json!({ "relations": rels, "characteristicVariety": hol });
            let mut summary = format!("D{}/({})", e.n, rels.join(", "));
            let passed = match verify {
                None => true,
                Some(ImageCheck::Shift) => {
                    let rep = dr_shift_check(m.as_ref(), e, ctx.opts).map_err(math)?;
                    result["shift"] = json!(rep);
                    summary = format!(
                        "{summary}\nshift: source {:?}, image {:?}",
                        rep.source, rep.target
                    );
                    rep.equal
                }
                Some(ImageCheck::Chainmap) => {
                    let rep = chain_map_verify(m.as_ref(), e, ctx.opts.start).map_err(math)?;
                    result["chainMap"] = json!(rep);
                    summary = format!(
                        "{summary}\nchain map commutes: {}, injective: {}",
                        rep.commutes, rep.injective
                    );
                    rep.commutes && rep.injective
                }
                Some(ImageCheck::Homotopy) => {
                    if e.codim() != 1 {
                        return Err(Failure::Usage(
                            "the homotopy check needs codimension one".into(),
                        ));
                    }
                    let rep = homotopy_verify(m.as_ref(), e, ctx.opts.start).map_err(math)?;
                    result["homotopy"] = json!(rep);
                    summary = format!(
                        "{summary}\nhomotopy identity: {}",
                        rep.identity_holds && rep.sign_check
                    );
                    rep.identity_holds && rep.sign_check
                }
            };
            if passed {
                Ok(Success::new(summary, result))
            } else {
                Err(Failure::Math {
                    message: summary,
                    result,
                })
            }
        }
        Command::Verify { selector } => {
            let suites = match selector {
                Selector::All => Suite::ALL.to_vec(),
                Selector::One(s) => vec![*s],
            };
            let reports = run_suites(
                &suites,
                &VerifyConfig {
                    t_prec: ctx.prec,
                    opts: ctx.opts,
                },
            );
            let passed = reports.iter().all(|r| r.passed);
            let mut lines: Vec<String> = Vec::new();
            for r in &reports {
                for c in &r.checks {
                    lines.push(format!(
                        "{} {}: {} [{}]",
                        if c.passed { "PASS" } else { "FAIL" },
                        r.suite,
                        c.name,
                        c.anchor
                    ));
                }
            }
            let total: usize = reports.iter().map(|r| r.checks.len()).sum();
            let ok: usize = reports
                .iter()
                .map(|r| r.checks.iter().filter(|c| c.passed).count())
                .sum();
            lines.push(format!(
                "{} {ok}/{total} checks",
                if passed { "PASS" } else { "FAIL" }
            ));
            let result = json!({ "passed": passed, "suites": reports });
            if passed {
                Ok(Success::new(lines.join("\n"), result))
            } else {
                Err(Failure::Math {
                    message: lines.join("\n"),
                    result,
                })
            }
        }
    }
}

/// Parses `args` (program name first), runs the command and renders output.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Output {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Output {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let ctx = Ctx {
        prec: cli.t_prec.max(1),
        dim: cli.dim,
        opts: DrOptions {
            start: cli.x_deg_start,
            max: cli.x_deg_max,
        },
    };
    let (status, code, summary, result, warnings) = match dispatch(&cli.command, &ctx) {
        Ok(s) => ("ok", 0, s.summary, s.result, s.warnings),
        Err(Failure::Math { message, result }) => {
            ("failure", 1, message.clone(), result, vec![message])
        }
        Err(Failure::Usage(message)) => ("usage", 2, message.clone(), Value::Null, vec![message]),
    };
    let report = RunReport {
        command: args
            .iter()
            .skip(1)
            .map(|a| a.to_string_lossy().into_owned())
            .collect(),
        t_precision: ctx.prec,
        degree_windows: DegreeWindows {
            start: ctx.opts.start,
            max: ctx.opts.max,
        },
        status,
        exit_code: code,
        summary: summary.clone(),
        result,
        warnings: warnings.clone(),
    };
    if cli.json || cli.pretty {
        let text = if cli.pretty {
            serde_json::to_string_pretty(&report)
        } else {
            serde_json::to_string(&report)
        }
        .expect("reports serialize");
        return Output {
            code,
            stdout: text + "\n",
            stderr: String::new(),
        };
    }
    match code {
        0 => {
            let mut stderr = String::new();
            for w in &warnings {
                stderr.push_str(&format!("warning: {w}\n"));
            }
            Output {
                code,
                stdout: summary + "\n",
                stderr,
            }
        }
        _ => Output {
            code,
            stdout: String::new(),
            stderr: format!("error: {summary}\n"),
        },
    }
}
