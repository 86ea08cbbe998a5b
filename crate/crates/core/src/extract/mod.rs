//! Estimator extraction: the quantum program becomes a classical program
//! that only increments a cost counter (`T`) or an error counter (`E`).

mod epsilon;
mod hoist;

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{emit_cexpr, CExpr, GateSet, Param, Program, Stmt, StmtKind, Subroutine};
use crate::symexpr::Expr;

pub use epsilon::{
    collect_epsilons, mangle, site_label, EpsilonVar, Granularity, EPS_DOMAIN,
};
pub use hoist::{hoist_conditional, HoistError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Counter {
    T,
    E,
}

impl fmt::Display for Counter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Counter::T => "T",
            Counter::E => "E",
        })
    }
}

impl FromStr for Counter {
    type Err = String;
    fn from_str(s: &str) -> Result<Counter, String> {
        match s {
            "T" | "t" => Ok(Counter::T),
            "E" | "e" => Ok(Counter::E),
            other => Err(format!("unknown counter `{other}` (expected T or E)")),
        }
    }
}

/// Statement of an estimator program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all_fields = "camelCase")]
pub enum EStmt {
    Increment {
        counter: Counter,
        amount: CExpr,
    },
    Call {
        callee: String,
        args: Vec<CExpr>,
        label: String,
    },
    For {
        index: String,
        lo: CExpr,
        hi: CExpr,
        body: Vec<EStmt>,
    },
    If {
        cond: CExpr,
        then_body: Vec<EStmt>,
        else_body: Vec<EStmt>,
    },
    Let {
        name: String,
        value: CExpr,
    },
    MeasureBranch {
        then_body: Vec<EStmt>,
        else_body: Vec<EStmt>,
    },
    /// A gate with its cost and error; only present in gate traces built for
    /// instantiation, never in cost or error estimators.
    Gate {
        gate: String,
        cost: CExpr,
        error: CExpr,
    },
}

/// How a subroutine-local epsilon reference maps to a program variable:
/// the caller's context path is extended by `rel_path` before mangling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpsRef {
    pub rel_path: Vec<String>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimatorSubroutine {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<EStmt>,
    /// Local names standing for epsilon variables. Gate intrinsics use
    /// `Gate@k::eps` names, which cannot clash with DSL identifiers.
    pub eps_refs: BTreeMap<String, EpsRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimatorProgram {
    pub counter: Counter,
    pub subroutines: Vec<EstimatorSubroutine>,
    pub entry_name: String,
    pub granularity: Granularity,
    pub epsilons: Vec<EpsilonVar>,
}

impl EstimatorProgram {
    pub fn subroutine(&self, name: &str) -> Option<&EstimatorSubroutine> {
        self.subroutines.iter().find(|s| s.name == name)
    }

    pub fn entry(&self) -> Option<&EstimatorSubroutine> {
        self.subroutine(&self.entry_name)
    }

    pub fn epsilon_names(&self) -> Vec<String> {
        self.epsilons.iter().map(|e| e.mangled_name.clone()).collect()
    }

    /// Renders the estimator in DSL syntax with `inc C amount;` statements.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, sub) in self.subroutines.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            let header = crate::ir::emit_header(&Subroutine {
                name: sub.name.clone(),
                params: sub.params.clone(),
                body: Vec::new(),
                span: Default::default(),
            });
            let _ = writeln!(out, "{header} {{");
            dump_block(&sub.body, 1, &mut out);
            out.push_str("}\n");
        }
        out
    }
}

fn dump_block(body: &[EStmt], depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    for s in body {
        match s {
            EStmt::Increment { counter, amount } => {
                let _ = writeln!(out, "{pad}inc {counter} {};", emit_cexpr(amount));
            }
            EStmt::Call { callee, args, label } => {
                let a: Vec<String> = args.iter().map(emit_cexpr).collect();
                let _ = writeln!(out, "{pad}{callee}({});  # {label}", a.join(", "));
            }
            EStmt::Gate { gate, cost, error } => {
                let _ = writeln!(
                    out,
                    "{pad}gate {gate} cost {} error {};",
                    emit_cexpr(cost),
                    emit_cexpr(error)
                );
            }
            EStmt::Let { name, value } => {
                let _ = writeln!(out, "{pad}let {name} = {};", emit_cexpr(value));
            }
            EStmt::For {
                index,
                lo,
                hi,
                body,
            } => {
                let _ = writeln!(out, "{pad}for {index} in {}..{} {{", emit_cexpr(lo), emit_cexpr(hi));
                dump_block(body, depth + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
            EStmt::If {
                cond,
                then_body,
                else_body,
            } => {
                let _ = writeln!(out, "{pad}if {} {{", emit_cexpr(cond));
                dump_branches(then_body, else_body, depth, out);
            }
            EStmt::MeasureBranch {
                then_body,
                else_body,
            } => {
                let _ = writeln!(out, "{pad}ifmeasure {{");
                dump_branches(then_body, else_body, depth, out);
            }
        }
    }
}

fn dump_branches(then_body: &[EStmt], else_body: &[EStmt], depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    dump_block(then_body, depth + 1, out);
    if else_body.is_empty() {
        let _ = writeln!(out, "{pad}}}");
    } else {
        let _ = writeln!(out, "{pad}}} else {{");
        dump_block(else_body, depth + 1, out);
        let _ = writeln!(out, "{pad}}}");
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("gate `{0}` is not defined by the gate set")]
    UnknownGate(String),
    #[error("entry subroutine `{0}` is not defined")]
    MissingEntry(String),
}

/// Replaces every argument bound to a don't-care parameter (of a subroutine
/// or a gate) by the default value of its kind.
pub fn substitute_dontcares(p: &Program, gates: &GateSet) -> Program {
    let params: HashMap<&str, Vec<&Param>> = p
        .subroutines
        .iter()
        .map(|s| (s.name.as_str(), s.params.iter().collect()))
        .chain(
            gates
                .gates
                .values()
                .map(|g| (g.name.as_str(), g.params.iter().collect())),
        )
        .collect();
    fn rewrite(body: &[Stmt], params: &HashMap<&str, Vec<&Param>>) -> Vec<Stmt> {
        body.iter()
            .map(|s| {
                let kind = match &s.kind {
                    StmtKind::GateCall { gate: name, args } | StmtKind::Call { callee: name, args } => {
                        let new_args: Vec<CExpr> = match params.get(name.as_str()) {
                            Some(ps) if ps.len() == args.len() => args
                                .iter()
                                .zip(ps)
                                .map(|(a, p)| if p.dont_care { p.kind.default_value() } else { a.clone() })
                                .collect(),
                            _ => args.clone(),
                        };
                        match &s.kind {
                            StmtKind::GateCall { .. } => StmtKind::GateCall {
                                gate: name.clone(),
                                args: new_args,
                            },
                            _ => StmtKind::Call {
                                callee: name.clone(),
                                args: new_args,
                            },
                        }
                    }
                    StmtKind::For {
                        index,
                        lo,
                        hi,
                        body,
                    } => StmtKind::For {
                        index: index.clone(),
                        lo: lo.clone(),
                        hi: hi.clone(),
                        body: rewrite(body, params),
                    },
                    StmtKind::If {
                        cond,
                        then_body,
                        else_body,
                    } => StmtKind::If {
                        cond: cond.clone(),
                        then_body: rewrite(then_body, params),
                        else_body: rewrite(else_body, params),
                    },
                    StmtKind::MeasureBranch {
                        then_body,
                        else_body,
                    } => StmtKind::MeasureBranch {
                        then_body: rewrite(then_body, params),
                        else_body: rewrite(else_body, params),
                    },
                    other => other.clone(),
                };
                Stmt::at(kind, s.span)
            })
            .collect()
    }
    let mut out = p.clone();
    for s in &mut out.subroutines {
        s.body = rewrite(&s.body, &params);
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Cost,
    Error,
    Trace,
}

struct Builder<'a> {
    gates: &'a GateSet,
    mode: Mode,
    k: usize,
    refs: BTreeMap<String, EpsRef>,
}

impl Builder<'_> {
    fn gate_exprs(&mut self, gate: &str) -> Result<(CExpr, CExpr), ExtractError> {
        let def = self
            .gates
            .get(gate)
            .ok_or_else(|| ExtractError::UnknownGate(gate.to_string()))?;
        let (mut cost, mut error) = (def.cost.clone(), def.error.clone());
        if let Some(eps) = &def.intrinsic_epsilon {
            let label = site_label(gate, self.k);
            let local = format!("{label}::{eps}");
            let rename = HashMap::from([(eps.clone(), Expr::var(local.clone()))]);
            cost = cost.substitute(&rename);
            error = error.substitute(&rename);
            self.refs.insert(
                local,
                EpsRef {
                    rel_path: vec![label],
                    source: eps.clone(),
                },
            );
        }
        Ok((cost, error))
    }

    fn block(&mut self, body: &[Stmt]) -> Result<Vec<EStmt>, ExtractError> {
        let mut out = Vec::new();
        for s in body {
            let k = self.k;
            self.k += 1;
            match &s.kind {
                StmtKind::GateCall { gate, .. } => {
                    self.k = k;
                    let (cost, error) = self.gate_exprs(gate)?;
                    self.k = k + 1;
                    match self.mode {
                        Mode::Cost if !cost.is_zero_const() => out.push(EStmt::Increment {
                            counter: Counter::T,
                            amount: cost,
                        }),
                        Mode::Error if !error.is_zero_const() => out.push(EStmt::Increment {
                            counter: Counter::E,
                            amount: error,
                        }),
                        Mode::Trace => out.push(EStmt::Gate {
                            gate: gate.clone(),
                            cost,
                            error,
                        }),
                        _ => {}
                    }
                }
                StmtKind::Call { callee, args } => out.push(EStmt::Call {
                    callee: callee.clone(),
                    args: args.clone(),
                    label: site_label(callee, k),
                }),
                StmtKind::EpsilonDecl { name } => {
                    self.refs.insert(
                        name.clone(),
                        EpsRef {
                            rel_path: Vec::new(),
                            source: name.clone(),
                        },
                    );
                    if self.mode != Mode::Cost {
                        out.push(EStmt::Increment {
                            counter: Counter::E,
                            amount: Expr::var(name.clone()),
                        });
                    }
                }
                StmtKind::Let { name, value } => out.push(EStmt::Let {
                    name: name.clone(),
                    value: value.clone(),
                }),
                StmtKind::For {
                    index,
                    lo,
                    hi,
                    body,
                } => {
                    let body = self.block(body)?;
                    out.push(EStmt::For {
                        index: index.clone(),
                        lo: lo.clone(),
                        hi: hi.clone(),
                        body,
                    });
                }
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                } => {
                    let then_body = self.block(then_body)?;
                    let else_body = self.block(else_body)?;
                    out.push(EStmt::If {
                        cond: cond.clone(),
                        then_body,
                        else_body,
                    });
                }
                StmtKind::MeasureBranch {
                    then_body,
                    else_body,
                } => {
                    let then_body = self.block(then_body)?;
                    let else_body = self.block(else_body)?;
                    out.push(EStmt::MeasureBranch {
                        then_body,
                        else_body,
                    });
                }
            }
        }
        Ok(out)
    }
}

fn build(
    p: &Program,
    gates: &GateSet,
    g: Granularity,
    mode: Mode,
) -> Result<EstimatorProgram, ExtractError> {
    if p.entry().is_none() {
        return Err(ExtractError::MissingEntry(p.entry_name.clone()));
    }
    let mut subroutines = Vec::new();
    for sub in &p.subroutines {
        let mut b = Builder {
            gates,
            mode,
            k: 0,
            refs: BTreeMap::new(),
        };
        let body = b.block(&sub.body)?;
        subroutines.push(EstimatorSubroutine {
            name: sub.name.clone(),
            params: sub.params.clone(),
            body,
            eps_refs: b.refs,
        });
    }
    Ok(EstimatorProgram {
        counter: if mode == Mode::Error { Counter::E } else { Counter::T },
        subroutines,
        entry_name: p.entry_name.clone(),
        granularity: g,
        epsilons: collect_epsilons(p, gates, g),
    })
}

/// Cost estimator: costly gates become `inc T cost`, free gates and epsilon
/// declarations disappear, classical control flow is kept verbatim.
pub fn make_cost_estimator(
    p: &Program,
    gates: &GateSet,
    g: Granularity,
) -> Result<EstimatorProgram, ExtractError> {
    build(p, gates, g, Mode::Cost)
}

/// Error estimator: every epsilon declaration and every gate with an error
/// contribution becomes an `inc E` statement.
pub fn make_error_estimator(
    p: &Program,
    gates: &GateSet,
    g: Granularity,
) -> Result<EstimatorProgram, ExtractError> {
    build(p, gates, g, Mode::Error)
}

/// Gate trace used for instantiation: every gate call is kept with its cost
/// and error, epsilon declarations add to the error.
pub fn make_gate_trace(
    p: &Program,
    gates: &GateSet,
    g: Granularity,
) -> Result<EstimatorProgram, ExtractError> {
    build(p, gates, g, Mode::Trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse;

    const AQFT_LIKE: &str = "def sub(n: int) {\n  epsilon eps_A;\n  for i in 0..n { H(i); Rz(i, 0.3); T(i); Rz(i, 0.1); }\n}\ndef main(n: int) { sub(n); sub(n + 1); }";

    #[test]
    fn dontcares_replaced() {
        let p = parse("def f(@dontcare a: real, b: int) { }\ndef main() { f(1.2, 3); f(3.4, 3); Rz(0, 2.0); }").unwrap();
        let q = substitute_dontcares(&p, &GateSet::clifford_t());
        let body = &q.entry().unwrap().body;
        for s in &body[..2] {
            let StmtKind::Call { args, .. } = &s.kind else { panic!() };
            assert_eq!(args[0], Expr::num(0.0));
            assert_eq!(args[1], Expr::int(3));
        }
        assert_eq!(body[0], body[1]);
        let StmtKind::GateCall { args, .. } = &body[2].kind else { panic!() };
        assert_eq!(args, &vec![Expr::int(0), Expr::num(0.0)]);
        let plain = parse("def main(n: int) { f(n); }\ndef f(x: int) { }").unwrap();
        assert_eq!(substitute_dontcares(&plain, &GateSet::clifford_t()), plain);
    }

    #[test]
    fn cost_estimator_shape() {
        let p = parse(AQFT_LIKE).unwrap();
        let ep = make_cost_estimator(&p, &GateSet::clifford_t(), Granularity::default()).unwrap();
        let sub = ep.subroutine("sub").unwrap();
        let EStmt::For { body, .. } = &sub.body[0] else { panic!("{:?}", sub.body) };
        assert_eq!(body.len(), 3);
        assert_eq!(
            body[1],
            EStmt::Increment {
                counter: Counter::T,
                amount: Expr::int(1)
            }
        );
        assert!(sub.eps_refs.contains_key("Rz@3::eps_R"));
        assert!(sub.eps_refs.contains_key("Rz@5::eps_R"));
        assert!(ep.dump().contains("inc T 1;"));
        let only_h = parse("def main() { H(0); H(1); }").unwrap();
        let e = make_cost_estimator(&only_h, &GateSet::clifford_t(), Granularity::default()).unwrap();
        assert!(e.entry().unwrap().body.is_empty());
    }

    #[test]
    fn error_estimator_counts_declarations() {
        let p = parse(AQFT_LIKE).unwrap();
        let ep = make_error_estimator(&p, &GateSet::clifford_t(), Granularity::default()).unwrap();
        let sub = ep.subroutine("sub").unwrap();
        assert_eq!(
            sub.body[0],
            EStmt::Increment {
                counter: Counter::E,
                amount: Expr::var("eps_A")
            }
        );
        assert!(matches!(
            make_error_estimator(&parse("def main() { Foo(0); }").unwrap(), &GateSet::clifford_t(), Granularity::default()),
            Err(ExtractError::UnknownGate(_))
        ));
    }

    fn names(p: &Program, g: Granularity) -> Vec<String> {
        collect_epsilons(p, &GateSet::clifford_t(), g)
            .into_iter()
            .map(|e| e.mangled_name)
            .collect()
    }

    #[test]
    fn granularity_levels() {
        let p = parse(AQFT_LIKE).unwrap();
        assert_eq!(names(&p, Granularity::depth(0)), vec!["eps_A", "eps_R"]);
        assert_eq!(
            names(&p, Granularity::depth(1)),
            vec!["sub@0::eps_A", "sub@0::eps_R", "sub@1::eps_A", "sub@1::eps_R"]
        );
        assert_eq!(
            names(&p, Granularity::unlimited()),
            vec![
                "sub@0::eps_A",
                "sub@0::Rz@3::eps_R",
                "sub@0::Rz@5::eps_R",
                "sub@1::eps_A",
                "sub@1::Rz@3::eps_R",
                "sub@1::Rz@5::eps_R"
            ]
        );
        assert!(names(&parse("def main() { H(0); }").unwrap(), Granularity::default()).is_empty());
    }

    #[test]
    fn granularity_parses() {
        assert_eq!("3".parse::<Granularity>().unwrap(), Granularity::depth(3));
        assert_eq!("unlimited".parse::<Granularity>().unwrap(), Granularity::unlimited());
        assert!("-1".parse::<Granularity>().is_err());
        let json = serde_json::to_string(&Granularity::unlimited()).unwrap();
        assert_eq!(serde_json::from_str::<Granularity>(&json).unwrap(), Granularity::unlimited());
    }
}
