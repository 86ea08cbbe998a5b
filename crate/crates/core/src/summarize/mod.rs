//! Symbolic abstract interpretation of estimator programs.

mod passes;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::extract::{
    hoist_conditional, make_cost_estimator, make_error_estimator, mangle, substitute_dontcares,
    Counter, EStmt, EstimatorProgram, EstimatorSubroutine, ExtractError, Granularity, EPS_DOMAIN,
};
use crate::ir::{GateSet, ParamKind, Program};
use crate::symexpr::{
    evaluate, expand, free_vars, parse_sexpr, simplify, sum_elim_with, to_text, Bounds, Env,
    EvalError, Expr, Interval, Node, SummaryKind, TextFormat,
};

pub use passes::{lift_loop_increment, merge_increments, prepare, LiftError};

const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub counter: Counter,
    pub expr: Expr,
    pub kind: SummaryKind,
    pub residual_control_flow: bool,
    pub symbol_params: Vec<String>,
    pub epsilon_vars: Vec<String>,
}

impl Summary {
    pub fn evaluate(&self, env: &Env) -> Result<f64, EvalError> {
        evaluate(&self.expr, env)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> Result<Summary, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Serialize, Deserialize)]
struct SummaryRecord {
    counter: Counter,
    kind: SummaryKind,
    expression: String,
    symbols: Vec<String>,
    epsilons: Vec<String>,
}

impl Serialize for Summary {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SummaryRecord {
            counter: self.counter,
            kind: self.kind,
            expression: to_text(&self.expr, TextFormat::Sexpr),
            symbols: self.symbol_params.clone(),
            epsilons: self.epsilon_vars.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Summary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Summary, D::Error> {
        let r = SummaryRecord::deserialize(d)?;
        let expr = parse_sexpr(&r.expression).map_err(serde::de::Error::custom)?;
        Ok(Summary {
            counter: r.counter,
            residual_control_flow: expr.has_residual_control_flow(),
            expr,
            kind: r.kind,
            symbol_params: r.symbols,
            epsilon_vars: r.epsilons,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SummarizeError {
    #[error("entry subroutine `{0}` is not defined")]
    MissingEntry(String),
    #[error("call to undefined subroutine `{0}`")]
    UnknownSubroutine(String),
    #[error("call nesting exceeds {MAX_CALL_DEPTH} levels (recursive program?)")]
    RecursionLimit,
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

struct Interp<'a> {
    ep: &'a EstimatorProgram,
    counter: Counter,
    bounds: Bounds,
    /// Names a fresh loop index must avoid: active indices and globals.
    taken: HashSet<String>,
    fresh: usize,
    kind: SummaryKind,
}

type Scope = HashMap<String, Expr>;

impl Interp<'_> {
    fn call(&mut self, sub: &EstimatorSubroutine, args: Vec<Expr>, path: &mut Vec<String>) -> Result<Expr, SummarizeError> {
        if path.len() > MAX_CALL_DEPTH {
            return Err(SummarizeError::RecursionLimit);
        }
        let mut scope: Scope = sub.params.iter().map(|p| p.name.clone()).zip(args).collect();
        for (local, r) in &sub.eps_refs {
            let mut full = path.clone();
            full.extend(r.rel_path.iter().cloned());
            scope.insert(local.clone(), Expr::var(mangle(&full, &r.source, self.ep.granularity)));
        }
        self.block(&sub.body, &scope, path)
    }

    fn index_name(&mut self, index: &str) -> String {
        if !self.taken.contains(index) {
            return index.to_string();
        }
        loop {
            self.fresh += 1;
            let name = format!("{index}_{}", self.fresh);
            if !self.taken.contains(&name) {
                return name;
            }
        }
    }

    fn block(&mut self, body: &[EStmt], outer: &Scope, path: &mut Vec<String>) -> Result<Expr, SummarizeError> {
        let mut scope = outer.clone();
        let mut terms: Vec<Expr> = Vec::new();
        for s in body {
            match s {
                EStmt::Increment { counter, amount } => {
                    if *counter == self.counter {
                        terms.push(amount.substitute(&scope));
                    }
                }
                EStmt::Gate { cost, error, .. } => {
                    let amount = if self.counter == Counter::T { cost } else { error };
                    terms.push(amount.substitute(&scope));
                }
                EStmt::Let { name, value } => {
                    let v = simplify(&value.substitute(&scope));
                    scope.insert(name.clone(), v);
                }
                EStmt::Call { callee, args, label } => {
                    let target = self
                        .ep
                        .subroutine(callee)
                        .ok_or_else(|| SummarizeError::UnknownSubroutine(callee.clone()))?;
                    let args = args.iter().map(|a| simplify(&a.substitute(&scope))).collect();
                    path.push(label.clone());
                    let r = self.call(target, args, path);
                    path.pop();
                    terms.push(r?);
                }
                EStmt::For { .. } => {
                    let hoisted = hoist_conditional(s);
                    let EStmt::For {
                        index,
                        lo,
                        hi,
                        body,
                    } = hoisted.as_ref().unwrap_or(s)
                    else {
                        unreachable!("hoisting keeps the loop")
                    };
                    let lo = prune_min_max(&simplify(&lo.substitute(&scope)), &self.bounds);
                    let hi = prune_min_max(&simplify(&hi.substitute(&scope)), &self.bounds);
                    let name = self.index_name(index);
                    let (lr, hr) = (self.bounds.range(&lo), self.bounds.range(&hi));
                    self.bounds.set(name.clone(), Interval::new(lr.lo.ceil(), hr.hi - 1.0));
                    self.taken.insert(name.clone());
                    let mut inner = scope.clone();
                    inner.insert(index.clone(), Expr::var(name.clone()));
                    let body = self.block(body, &inner, path);
                    self.taken.remove(&name);
                    self.bounds.remove(&name);
                    let body = body?;
                    if body.is_zero_const() {
                        continue;
                    }
                    let (e, k) = sum_elim_with(&Expr::sum(name, lo, hi, body), &self.bounds);
                    self.kind = self.kind.join(k);
                    terms.push(e);
                }
                EStmt::If {
                    cond,
                    then_body,
                    else_body,
                } => {
                    let c = simplify(&cond.substitute(&scope));
                    if let Some(v) = c.as_f64() {
                        let taken = if v != 0.0 { then_body } else { else_body };
                        terms.push(self.block(taken, &scope, path)?);
                        continue;
                    }
                    let t = self.block(then_body, &scope, path)?;
                    let e = self.block(else_body, &scope, path)?;
                    if t != e {
                        self.kind = SummaryKind::UpperBound;
                    }
                    terms.push(simplify(&Expr::max(t, e)));
                }
                EStmt::MeasureBranch {
                    then_body,
                    else_body,
                } => {
                    let t = self.block(then_body, &scope, path)?;
                    let e = self.block(else_body, &scope, path)?;
                    if self.counter == Counter::T && t != e {
                        self.kind = SummaryKind::UpperBound;
                    }
                    terms.push(simplify(&Expr::max(t, e)));
                }
            }
        }
        let total = terms.into_iter().reduce(|a, b| a + b).unwrap_or_else(Expr::zero);
        Ok(simplify(&total))
    }
}

/// Drops the side of a `min` or `max` that the known ranges show can never be
/// selected.
fn prune_min_max(e: &Expr, bounds: &Bounds) -> Expr {
    let e = e.map_children(|c| prune_min_max(c, bounds));
    let ge = |a: &Expr, b: &Expr| bounds.is_nonneg(&simplify(&(a.clone() - b.clone())));
    match e.node() {
        Node::Min(a, b) if ge(b, a) => a.clone(),
        Node::Min(a, b) if ge(a, b) => b.clone(),
        Node::Max(a, b) if ge(b, a) => b.clone(),
        Node::Max(a, b) if ge(a, b) => a.clone(),
        _ => e,
    }
}

/// Summarizes the accumulated value of `counter` over a run of the entry
/// subroutine, with unbound entry parameters left symbolic.
pub fn summarize(ep: &EstimatorProgram, counter: Counter) -> Result<Summary, SummarizeError> {
    let entry = ep
        .entry()
        .ok_or_else(|| SummarizeError::MissingEntry(ep.entry_name.clone()))?;
    let prepared = prepare(ep);
    let eps_names = ep.epsilon_names();
    let mut bounds = Bounds::new();
    for e in &eps_names {
        bounds.set(e.clone(), Interval::new(EPS_DOMAIN.0, EPS_DOMAIN.1));
    }
    for p in &entry.params {
        if p.kind == ParamKind::Int {
            bounds.set(p.name.clone(), Interval::nonneg());
        }
    }
    let taken: HashSet<String> = entry
        .params
        .iter()
        .map(|p| p.name.clone())
        .chain(eps_names.iter().cloned())
        .collect();
    let mut it = Interp {
        ep: &prepared,
        counter,
        bounds,
        taken,
        fresh: 0,
        kind: SummaryKind::Exact,
    };
    let entry = prepared.entry().expect("prepare keeps subroutines");
    let args = entry.params.iter().map(|p| Expr::var(p.name.clone())).collect();
    let raw = it.call(entry, args, &mut Vec::new())?;
    let simplified = simplify(&raw);
    let expanded = simplify(&expand(&simplified));
    let expr = if expanded.node_count() < simplified.node_count() {
        expanded
    } else {
        simplified
    };

    let eps_set: BTreeSet<&String> = eps_names.iter().collect();
    let mut symbols: Vec<String> = entry
        .params
        .iter()
        .filter(|p| !p.dont_care)
        .map(|p| p.name.clone())
        .collect();
    for v in free_vars(&expr) {
        if !eps_set.contains(&v) && !symbols.contains(&v) {
            symbols.push(v);
        }
    }
    Ok(Summary {
        counter,
        residual_control_flow: expr.has_residual_control_flow(),
        expr,
        kind: it.kind,
        symbol_params: symbols,
        epsilon_vars: eps_names,
    })
}

/// Summary of the cost (`T`) or error (`E`) of a whole program.
pub fn summarize_program(
    p: &Program,
    gates: &GateSet,
    g: Granularity,
    counter: Counter,
) -> Result<Summary, SummarizeError> {
    let p = substitute_dontcares(p, gates);
    let ep = match counter {
        Counter::T => make_cost_estimator(&p, gates, g)?,
        Counter::E => make_error_estimator(&p, gates, g)?,
    };
    summarize(&ep, counter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse, parse_cexpr};

    fn summary(src: &str, counter: Counter) -> Summary {
        summarize_program(&parse(src).unwrap(), &GateSet::clifford_t(), Granularity::default(), counter).unwrap()
    }

    fn at(s: &Summary, binds: &[(&str, f64)]) -> f64 {
        let mut env = Env::new();
        for (k, v) in binds {
            env.set(*k, *v);
        }
        s.evaluate(&env).unwrap()
    }

    #[test]
    fn loop_epsilon_accumulates() {
        let s = summary("def main(n: int) { for i in 0..n { epsilon e; } }", Counter::E);
        assert_eq!(s.kind, SummaryKind::Exact);
        assert_eq!(s.expr, simplify(&parse_cexpr("e * n").unwrap()));
        assert!((at(&s, &[("n", 5.0), ("e", 0.02)]) - 0.1).abs() < 1e-15);
        assert_eq!(s.symbol_params, vec!["n"]);
        assert_eq!(s.epsilon_vars, vec!["e"]);
    }

    #[test]
    fn runtime_flag_takes_max() {
        let src = "def a() { for k in 0..100 { T(0); } }\ndef b() { for k in 0..250 { T(0); } }\ndef main(flag: int) { if flag < 1 { a(); } else { b(); } }";
        let s = summary(src, Counter::T);
        assert_eq!(s.kind, SummaryKind::UpperBound);
        assert_eq!(s.expr, Expr::int(250));
    }

    #[test]
    fn constant_branch_is_exact() {
        let s = summary("def main() { let x = 3; if x < 2 { T(0); } else { T(0); T(1); } }", Counter::T);
        assert_eq!((s.expr, s.kind), (Expr::int(2), SummaryKind::Exact));
    }

    #[test]
    fn measurement_is_exact_for_error_only() {
        let src = "def main() { epsilon a; epsilon b; ifmeasure { Rz(0, 1.0); } else { T(0); } }";
        let e = summary(src, Counter::E);
        assert_eq!(e.kind, SummaryKind::Exact);
        let t = summary(src, Counter::T);
        assert_eq!(t.kind, SummaryKind::UpperBound);
        let v = at(&t, &[("eps_R", 0.25)]);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn triangular_loop_is_exact() {
        let src = "def main(n: int) { for i in 0..n { for j in 0..n - 1 - i { T(j); } } }";
        let s = summary(src, Counter::T);
        assert_eq!(s.kind, SummaryKind::Exact);
        for n in 1..30 {
            assert_eq!(at(&s, &[("n", n as f64)]), (n * (n - 1) / 2) as f64);
        }
    }

    #[test]
    fn index_capture_avoided() {
        // The callee's loop index has the same name as the caller's.
        let src = "def f(m: int) { for i in 0..m { T(0); } }\ndef main(n: int) { for i in 0..n { f(i); } }";
        let s = summary(src, Counter::T);
        assert!(!s.residual_control_flow);
        for n in 0..12 {
            assert_eq!(at(&s, &[("n", n as f64)]), (n * (n - 1) / 2) as f64);
        }
    }

    #[test]
    fn json_round_trip() {
        let s = summary("def main(n: int) { for i in 0..n { Rz(i, 0.1); } }", Counter::T);
        let back = Summary::from_json(&s.to_json()).unwrap();
        assert_eq!(back.symbol_params, s.symbol_params);
        let env = Env::new().with("n", 7.0).with("eps_R", 1e-3);
        assert!((back.evaluate(&env).unwrap() - s.evaluate(&env).unwrap()).abs() < 1e-9);
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        for key in ["counter", "kind", "expression", "symbols", "epsilons"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
