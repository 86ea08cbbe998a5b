use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::ast::{CExpr, ParamKind, Program, Span, Stmt, StmtKind, Subroutine};
use super::gateset::GateSet;
use crate::symexpr::free_vars;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DiagnosticKind {
    MissingEntry,
    DuplicateDefinition,
    DuplicateParam,
    InvalidDontCare,
    UnresolvedCallee,
    UnknownGate,
    ArityMismatch,
    UnresolvedName,
    DuplicateEpsilon,
    ShadowedLoopIndex,
    InvalidExpression,
    RecursiveCall,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    pub subroutine: Option<String>,
    #[serde(skip)]
    pub span: Option<Span>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = &self.span {
            if s.line > 0 {
                write!(f, "{s}: ")?;
            }
        }
        write!(f, "{:?}: {}", self.kind, self.message)?;
        if let Some(sub) = &self.subroutine {
            write!(f, " (in `{sub}`)")?;
        }
        Ok(())
    }
}

struct Checker<'a> {
    program: &'a Program,
    gates: &'a GateSet,
    sub: &'a Subroutine,
    out: Vec<Diagnostic>,
    epsilons: HashSet<String>,
}

impl Checker<'_> {
    fn report(&mut self, kind: DiagnosticKind, span: Span, message: String) {
        self.out.push(Diagnostic {
            kind,
            message,
            subroutine: Some(self.sub.name.clone()),
            span: Some(span),
        });
    }

    fn expr(&mut self, e: &CExpr, scope: &[String], span: Span) {
        if e.has_residual_control_flow() {
            self.report(
                DiagnosticKind::InvalidExpression,
                span,
                "sums and conditionals are not classical expressions".into(),
            );
        }
        for v in free_vars(e) {
            if !scope.contains(&v) {
                self.report(DiagnosticKind::UnresolvedName, span, format!("unknown name `{v}`"));
            }
        }
    }

    fn block(&mut self, body: &[Stmt], scope: &mut Vec<String>) {
        let mark = scope.len();
        for s in body {
            self.stmt(s, scope);
        }
        scope.truncate(mark);
    }

    fn stmt(&mut self, s: &Stmt, scope: &mut Vec<String>) {
        let span = s.span;
        match &s.kind {
            StmtKind::GateCall { gate, args } => {
                for a in args {
                    self.expr(a, scope, span);
                }
                match self.gates.get(gate) {
                    // Calls are only parsed as gates when no subroutine has that name.
                    None if self.program.subroutine(gate).is_none() => {
                        let msg = format!(
                            "`{gate}` is neither a subroutine nor a gate of gate set `{}`",
                            self.gates.name
                        );
                        self.report(DiagnosticKind::UnresolvedCallee, span, msg);
                    }
                    None => {
                        let msg = format!("`{gate}` is a subroutine but is called as a gate");
                        self.report(DiagnosticKind::UnknownGate, span, msg);
                    }
                    Some(def) if def.params.len() != args.len() => {
                        let msg = format!(
                            "gate `{gate}` takes {} arguments, got {}",
                            def.params.len(),
                            args.len()
                        );
                        self.report(DiagnosticKind::ArityMismatch, span, msg);
                    }
                    Some(_) => {}
                }
            }
            StmtKind::Call { callee, args } => {
                for a in args {
                    self.expr(a, scope, span);
                }
                match self.program.subroutine(callee) {
                    None => self.report(
                        DiagnosticKind::UnresolvedCallee,
                        span,
                        format!("call to undefined subroutine `{callee}`"),
                    ),
                    Some(target) if target.params.len() != args.len() => {
                        let msg = format!(
                            "`{callee}` takes {} arguments, got {}",
                            target.params.len(),
                            args.len()
                        );
                        self.report(DiagnosticKind::ArityMismatch, span, msg);
                    }
                    Some(_) => {}
                }
            }
            StmtKind::For {
                index,
                lo,
                hi,
                body,
            } => {
                self.expr(lo, scope, span);
                self.expr(hi, scope, span);
                if scope.contains(index) {
                    self.report(
                        DiagnosticKind::ShadowedLoopIndex,
                        span,
                        format!("loop index `{index}` shadows a name in scope"),
                    );
                }
                scope.push(index.clone());
                self.block(body, scope);
                scope.pop();
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.expr(cond, scope, span);
                self.block(then_body, scope);
                self.block(else_body, scope);
            }
            StmtKind::MeasureBranch {
                then_body,
                else_body,
            } => {
                self.block(then_body, scope);
                self.block(else_body, scope);
            }
            StmtKind::EpsilonDecl { name } => {
                if !self.epsilons.insert(name.clone()) {
                    self.report(
                        DiagnosticKind::DuplicateEpsilon,
                        span,
                        format!("epsilon `{name}` declared twice"),
                    );
                }
                scope.push(name.clone());
            }
            StmtKind::Let { name, value } => {
                self.expr(value, scope, span);
                scope.push(name.clone());
            }
        }
    }
}

fn callees(body: &[Stmt], out: &mut Vec<String>) {
    super::ast::walk_stmts(body, &mut |s| {
        if let StmtKind::Call { callee, .. } = &s.kind {
            out.push(callee.clone());
        }
    });
}

fn find_cycles(p: &Program) -> Vec<Vec<String>> {
    let graph: BTreeMap<&str, Vec<String>> = p
        .subroutines
        .iter()
        .map(|s| {
            let mut c = Vec::new();
            callees(&s.body, &mut c);
            (s.name.as_str(), c)
        })
        .collect();
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = graph.keys().map(|k| (*k, Mark::Fresh)).collect();
    let mut cycles = Vec::new();
    fn dfs<'g>(
        node: &'g str,
        graph: &'g BTreeMap<&'g str, Vec<String>>,
        marks: &mut BTreeMap<&'g str, Mark>,
        stack: &mut Vec<&'g str>,
        cycles: &mut Vec<Vec<String>>,
    ) {
        marks.insert(node, Mark::Active);
        stack.push(node);
        for next in &graph[node] {
            let Some((key, _)) = graph.get_key_value(next.as_str()) else {
                continue;
            };
            match marks[key] {
                Mark::Fresh => dfs(key, graph, marks, stack, cycles),
                Mark::Active => {
                    let start = stack.iter().position(|n| n == key).expect("active on stack");
                    let mut cyc: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                    cyc.push(key.to_string());
                    cycles.push(cyc);
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done);
    }
    let keys: Vec<&str> = graph.keys().copied().collect();
    for k in keys {
        if marks[k] == Mark::Fresh {
            dfs(k, &graph, &mut marks, &mut Vec::new(), &mut cycles);
        }
    }
    cycles
}

/// Checks every structural invariant of a program. An empty list means the
/// program can be extracted, summarized and interpreted.
pub fn validate(p: &Program, gates: &GateSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let global = |kind, message: String| Diagnostic {
        kind,
        message,
        subroutine: None,
        span: None,
    };
    if p.entry().is_none() {
        out.push(global(
            DiagnosticKind::MissingEntry,
            format!("entry subroutine `{}` is not defined", p.entry_name),
        ));
    }
    let mut seen = HashSet::new();
    for s in &p.subroutines {
        if !seen.insert(s.name.as_str()) {
            out.push(global(
                DiagnosticKind::DuplicateDefinition,
                format!("subroutine `{}` defined twice", s.name),
            ));
        }
    }
    for sub in &p.subroutines {
        let mut ck = Checker {
            program: p,
            gates,
            sub,
            out: Vec::new(),
            epsilons: HashSet::new(),
        };
        let mut names = HashSet::new();
        for param in &sub.params {
            if !names.insert(param.name.as_str()) {
                ck.report(
                    DiagnosticKind::DuplicateParam,
                    sub.span,
                    format!("parameter `{}` declared twice", param.name),
                );
            }
            if param.dont_care && param.kind == ParamKind::Qureg {
                ck.report(
                    DiagnosticKind::InvalidDontCare,
                    sub.span,
                    format!("`@dontcare` is only allowed on int and real parameters (`{}`)", param.name),
                );
            }
        }
        let mut scope: Vec<String> = sub.params.iter().map(|p| p.name.clone()).collect();
        ck.block(&sub.body, &mut scope);
        out.extend(ck.out);
    }
    for cyc in find_cycles(p) {
        out.push(Diagnostic {
            kind: DiagnosticKind::RecursiveCall,
            message: format!("recursive call cycle {}", cyc.join(" -> ")),
            subroutine: cyc.first().cloned(),
            span: None,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse;

    fn kinds(src: &str) -> Vec<DiagnosticKind> {
        let p = parse(src).unwrap();
        validate(&p, &GateSet::clifford_t()).into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn clean_program() {
        assert!(kinds("def main(n: int) { for i in 0..n { H(i); Rz(i, 0.5); } }").is_empty());
    }

    #[test]
    fn undefined_callee() {
        assert_eq!(kinds("def main() { QPE2(1); }"), vec![DiagnosticKind::UnresolvedCallee]);
    }

    #[test]
    fn json_call_to_missing_subroutine() {
        let mut p = parse("def main() { }").unwrap();
        p.subroutines[0].body.push(Stmt::new(StmtKind::Call {
            callee: "QPE2".into(),
            args: vec![],
        }));
        let d = validate(&p, &GateSet::clifford_t());
        assert_eq!(d[0].kind, DiagnosticKind::UnresolvedCallee);
    }

    #[test]
    fn mutual_recursion() {
        let k = kinds("def f() { g(); }\ndef g() { f(); }\ndef main() { f(); }");
        assert_eq!(k, vec![DiagnosticKind::RecursiveCall]);
    }

    #[test]
    fn scoping_rules() {
        assert_eq!(kinds("def main() { H(q); }"), vec![DiagnosticKind::UnresolvedName]);
        assert_eq!(
            kinds("def main(n: int) { for n in 0..3 { } }"),
            vec![DiagnosticKind::ShadowedLoopIndex]
        );
        assert_eq!(
            kinds("def main() { for i in 0..3 { let x = i; } H(x); }"),
            vec![DiagnosticKind::UnresolvedName]
        );
        assert_eq!(
            kinds("def main() { epsilon e; epsilon e; }"),
            vec![DiagnosticKind::DuplicateEpsilon]
        );
        assert_eq!(
            kinds("def main(@dontcare r: qureg, r: int) { }"),
            vec![DiagnosticKind::InvalidDontCare, DiagnosticKind::DuplicateParam]
        );
        assert_eq!(kinds("def main() { CNOT(0); }"), vec![DiagnosticKind::ArityMismatch]);
    }
}
