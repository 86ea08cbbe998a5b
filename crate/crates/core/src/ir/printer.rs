//! Pretty-printer producing DSL source that parses back to the same AST.

use std::fmt::Write;

use super::ast::{CExpr, Program, Stmt, StmtKind, Subroutine};
use crate::symexpr::Node;

const P_CMP: u8 = 0;
const P_ADD: u8 = 1;
const P_MUL: u8 = 2;
const P_UNARY: u8 = 3;
const P_POW: u8 = 4;
const P_ATOM: u8 = 5;

fn prec(e: &CExpr) -> u8 {
    match e.node() {
        Node::IntConst(v) if *v < 0 => P_UNARY,
        Node::Const(v) if *v < 0.0 => P_UNARY,
        Node::Add(..) | Node::Sub(..) => P_ADD,
        Node::Mul(..) | Node::Div(..) => P_MUL,
        Node::Pow(..) => P_POW,
        Node::Cmp(..) => P_CMP,
        _ => P_ATOM,
    }
}

/// Renders a classical expression in DSL syntax.
pub fn emit_cexpr(e: &CExpr) -> String {
    let mut s = String::new();
    write_expr(e, &mut s);
    s
}

fn wrapped(e: &CExpr, min: u8, out: &mut String) {
    if prec(e) < min {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

fn infix(a: &CExpr, op: &str, b: &CExpr, level: u8, out: &mut String) {
    // Left-associative: the right operand needs parentheses at equal level.
    wrapped(a, level, out);
    let _ = write!(out, " {op} ");
    wrapped(b, level + 1, out);
}

fn call(name: &str, args: &[&CExpr], out: &mut String) {
    out.push_str(name);
    out.push('(');
    for (k, a) in args.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        write_expr(a, out);
    }
    out.push(')');
}

fn write_expr(e: &CExpr, out: &mut String) {
    match e.node() {
        Node::Const(v) => {
            let _ = write!(out, "{v:?}");
        }
        Node::IntConst(v) => {
            let _ = write!(out, "{v}");
        }
        Node::Var(name) => out.push_str(name),
        Node::Add(a, b) => infix(a, "+", b, P_ADD, out),
        Node::Sub(a, b) => infix(a, "-", b, P_ADD, out),
        Node::Mul(a, b) => infix(a, "*", b, P_MUL, out),
        Node::Div(a, b) => infix(a, "/", b, P_MUL, out),
        Node::Pow(a, b) => {
            wrapped(a, P_ATOM, out);
            out.push_str(" ^ ");
            wrapped(b, P_UNARY, out);
        }
        Node::Min(a, b) => call("min", &[a, b], out),
        Node::Max(a, b) => call("max", &[a, b], out),
        Node::Ceil(a) => call("ceil", &[a], out),
        Node::Floor(a) => call("floor", &[a], out),
        Node::Log(a) => call("log", &[a], out),
        Node::Exp2(a) => call("exp2", &[a], out),
        Node::Cmp(op, a, b) => {
            wrapped(a, P_ADD, out);
            let _ = write!(out, " {} ", op.symbol());
            wrapped(b, P_ADD, out);
        }
        // Not part of the classical language; shown for diagnostics only.
        Node::Sum { .. } | Node::Cond { .. } => {
            let _ = write!(out, "{e}");
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn emit_args(args: &[CExpr]) -> String {
    args.iter().map(emit_cexpr).collect::<Vec<_>>().join(", ")
}

fn emit_block(
    body: &[Stmt],
    depth: usize,
    out: &mut String,
    leaf: &dyn Fn(&Stmt) -> Option<String>,
) {
    for s in body {
        if let Some(line) = leaf(s) {
            indent(out, depth);
            out.push_str(&line);
            out.push('\n');
            continue;
        }
        indent(out, depth);
        match &s.kind {
            StmtKind::GateCall { gate: name, args } | StmtKind::Call { callee: name, args } => {
                let _ = writeln!(out, "{name}({});", emit_args(args));
            }
            StmtKind::EpsilonDecl { name } => {
                let _ = writeln!(out, "epsilon {name};");
            }
            StmtKind::Let { name, value } => {
                let _ = writeln!(out, "let {name} = {};", emit_cexpr(value));
            }
            StmtKind::For {
                index,
                lo,
                hi,
                body,
            } => {
                let _ = writeln!(out, "for {index} in {}..{} {{", emit_cexpr(lo), emit_cexpr(hi));
                emit_block(body, depth + 1, out, leaf);
                indent(out, depth);
                out.push_str("}\n");
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let _ = writeln!(out, "if {} {{", emit_cexpr(cond));
                emit_branches(then_body, else_body, depth, out, leaf);
            }
            StmtKind::MeasureBranch {
                then_body,
                else_body,
            } => {
                out.push_str("ifmeasure {\n");
                emit_branches(then_body, else_body, depth, out, leaf);
            }
        }
    }
}

fn emit_branches(
    then_body: &[Stmt],
    else_body: &[Stmt],
    depth: usize,
    out: &mut String,
    leaf: &dyn Fn(&Stmt) -> Option<String>,
) {
    emit_block(then_body, depth + 1, out, leaf);
    indent(out, depth);
    if else_body.is_empty() {
        out.push_str("}\n");
    } else {
        out.push_str("} else {\n");
        emit_block(else_body, depth + 1, out, leaf);
        indent(out, depth);
        out.push_str("}\n");
    }
}

pub(crate) fn emit_header(sub: &Subroutine) -> String {
    let params: Vec<String> = sub
        .params
        .iter()
        .map(|p| {
            format!(
                "{}{}: {}",
                if p.dont_care { "@dontcare " } else { "" },
                p.name,
                p.kind.keyword()
            )
        })
        .collect();
    format!("def {}({})", sub.name, params.join(", "))
}

/// Renders a program as DSL source.
pub fn emit(p: &Program) -> String {
    let mut out = String::new();
    for (k, sub) in p.subroutines.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{} {{", emit_header(sub));
        emit_block(&sub.body, 1, &mut out, &|_| None);
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse;
    use crate::ir::parser::parse_cexpr;

    #[test]
    fn expressions_round_trip() {
        for src in [
            "a - (b - c)",
            "a / (b * c)",
            "(a + b) * c",
            "-1 * x",
            "(-2) ^ k",
            "x ^ -1",
            "x ^ y ^ z",
            "(x ^ y) ^ z",
            "ceil(log(n / eps) / log(2)) + 3",
            "min(n * (n - 1) / 2, n * l)",
            "(a < b) + 1",
            "2 ^ (i + 1)",
            "1.5e-7 * x",
            "a - -3",
        ] {
            let e = parse_cexpr(src).unwrap();
            let printed = emit_cexpr(&e);
            assert_eq!(parse_cexpr(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn program_round_trip() {
        let src = "def inner(@dontcare q: int, n: int) {\n  epsilon eps_X;\n  let l = ceil(log2(n / eps_X)) + 3;\n  for i in 0..n { if i < l { T(q); } else { H(q); } }\n  ifmeasure { X(q); }\n}\ndef main(n: int) { inner(0, n); }\n";
        let p = parse(src).unwrap();
        let again = parse(&emit(&p)).unwrap();
        assert_eq!(p, again);
        assert_eq!(emit(&again), emit(&p));
    }
}
