//! Textual forms of expressions: an s-expression syntax that can be read
//! back, Wolfram-language input and LaTeX.

use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{simplify, CmpOp, Expr, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextFormat {
    Sexpr,
    Wolfram,
    Latex,
}

impl FromStr for TextFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<TextFormat, String> {
        match s {
            "sexpr" => Ok(TextFormat::Sexpr),
            "wolfram" => Ok(TextFormat::Wolfram),
            "latex" => Ok(TextFormat::Latex),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

/// Renders the simplified form of `expr`.
pub fn to_text(expr: &Expr, format: TextFormat) -> String {
    write_raw(&simplify(expr), format)
}

/// Renders `expr` as built, without simplifying.
pub fn write_raw(expr: &Expr, format: TextFormat) -> String {
    let mut out = String::new();
    match format {
        TextFormat::Sexpr => sexpr(expr, &mut out),
        TextFormat::Wolfram => {
            wolfram(expr, &mut out);
        }
        TextFormat::Latex => {
            latex(expr, &mut out);
        }
    }
    out
}

fn float_repr(v: f64) -> String {
    format!("{v:?}")
}

fn sexpr(e: &Expr, out: &mut String) {
    let op = |out: &mut String, name: &str, args: &[&Expr]| {
        out.push('(');
        out.push_str(name);
        for a in args {
            out.push(' ');
            sexpr(a, out);
        }
        out.push(')');
    };
    match e.node() {
        Node::Const(v) => out.push_str(&float_repr(*v)),
        Node::IntConst(v) => {
            let _ = write!(out, "{v}");
        }
        Node::Var(name) => out.push_str(name),
        Node::Add(a, b) => op(out, "+", &[a, b]),
        Node::Sub(a, b) => op(out, "-", &[a, b]),
        Node::Mul(a, b) => op(out, "*", &[a, b]),
        Node::Div(a, b) => op(out, "/", &[a, b]),
        Node::Pow(a, b) => op(out, "^", &[a, b]),
        Node::Min(a, b) => op(out, "min", &[a, b]),
        Node::Max(a, b) => op(out, "max", &[a, b]),
        Node::Ceil(a) => op(out, "ceil", &[a]),
        Node::Floor(a) => op(out, "floor", &[a]),
        Node::Log(a) => op(out, "log", &[a]),
        Node::Exp2(a) => op(out, "exp2", &[a]),
        Node::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            let _ = write!(out, "(sum {index} ");
            sexpr(lo, out);
            out.push(' ');
            sexpr(hi, out);
            out.push(' ');
            sexpr(body, out);
            out.push(')');
        }
        Node::Cond {
            pred,
            then,
            otherwise,
        } => op(out, "if", &[pred, then, otherwise]),
        Node::Cmp(c, a, b) => op(out, c.symbol(), &[a, b]),
    }
}

// Precedence levels shared by the infix printers.
const P_CMP: u8 = 0;
const P_ADD: u8 = 1;
const P_MUL: u8 = 2;
const P_POW: u8 = 3;
const P_ATOM: u8 = 4;

fn prec(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(v) if *v < 0.0 => P_ADD,
        Node::IntConst(v) if *v < 0 => P_ADD,
        Node::Add(..) | Node::Sub(..) => P_ADD,
        Node::Mul(..) | Node::Div(..) => P_MUL,
        Node::Pow(..) | Node::Exp2(_) => P_POW,
        Node::Cmp(..) => P_CMP,
        _ => P_ATOM,
    }
}

/// Wolfram symbols cannot contain `_`, `@`, `:` or `'`; each run of such
/// characters becomes a single `$`.
fn wolfram_symbol(name: &str) -> String {
    let mut s = String::new();
    let mut in_run = false;
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            s.push(ch);
            in_run = false;
        } else if !in_run {
            s.push('$');
            in_run = true;
        }
    }
    s
}

fn wolfram_float(v: f64) -> String {
    let r = float_repr(v);
    match r.split_once('e') {
        Some((m, x)) => format!("{m}*^{x}"),
        None => r,
    }
}

fn wolfram(e: &Expr, out: &mut String) {
    let w = |x: &Expr, min: u8, out: &mut String| {
        if prec(x) < min {
            out.push('(');
            wolfram(x, out);
            out.push(')');
        } else {
            wolfram(x, out);
        }
    };
    let call = |name: &str, args: &[&Expr], out: &mut String| {
        out.push_str(name);
        out.push('[');
        for (k, a) in args.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            wolfram(a, out);
        }
        out.push(']');
    };
    match e.node() {
        Node::Const(v) => out.push_str(&wolfram_float(*v)),
        Node::IntConst(v) => {
            let _ = write!(out, "{v}");
        }
        Node::Var(name) => out.push_str(&wolfram_symbol(name)),
        Node::Add(a, b) => {
            w(a, P_ADD, out);
            out.push_str(" + ");
            w(b, P_ADD, out);
        }
        Node::Sub(a, b) => {
            w(a, P_ADD, out);
            out.push_str(" - ");
            w(b, P_MUL, out);
        }
        Node::Mul(a, b) => {
            w(a, P_MUL, out);
            out.push('*');
            w(b, P_POW, out);
        }
        Node::Div(a, b) => {
            w(a, P_MUL, out);
            out.push('/');
            w(b, P_POW, out);
        }
        Node::Pow(a, b) => {
            w(a, P_ATOM, out);
            out.push('^');
            w(b, P_ATOM, out);
        }
        Node::Exp2(a) => {
            out.push_str("2^");
            w(a, P_ATOM, out);
        }
        Node::Min(a, b) => call("Min", &[a, b], out),
        Node::Max(a, b) => call("Max", &[a, b], out),
        Node::Ceil(a) => call("Ceiling", &[a], out),
        Node::Floor(a) => call("Floor", &[a], out),
        Node::Log(a) => call("Log", &[a], out),
        Node::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            out.push_str("Sum[");
            wolfram(body, out);
            let _ = write!(out, ", {{{}, ", wolfram_symbol(index));
            wolfram(lo, out);
            out.push_str(", ");
            w(hi, P_ADD, out);
            out.push_str(" - 1}]");
        }
        Node::Cond {
            pred,
            then,
            otherwise,
        } => call("If", &[pred, then, otherwise], out),
        Node::Cmp(c, a, b) => {
            w(a, P_ADD, out);
            let _ = write!(out, " {} ", c.symbol());
            w(b, P_ADD, out);
        }
    }
}

fn latex_symbol(name: &str) -> String {
    // Mangled names carry their call path before the last `::`.
    let (path, local) = match name.rsplit_once("::") {
        Some((p, l)) => (Some(p), l),
        None => (None, name),
    };
    let (base, sub) = match local.split_once('_') {
        Some((b, s)) => (b, Some(s)),
        None => (local, None),
    };
    let (base, primes) = match base.split_once('\'') {
        Some((b, p)) => (b, Some(p)),
        None => (base, None),
    };
    let mut s = match base {
        "eps" | "epsilon" => "\\varepsilon".to_string(),
        b if b.chars().count() == 1 => b.to_string(),
        b => format!("\\mathit{{{b}}}"),
    };
    if let Some(p) = primes {
        let _ = write!(s, "'_{{{p}}}");
    }
    if let Some(sub) = sub {
        let _ = write!(s, "_{{\\mathrm{{{}}}}}", sub.replace('_', "\\_"));
    }
    if let Some(p) = path {
        let _ = write!(s, "^{{(\\mathrm{{{}}})}}", p.replace('_', "\\_"));
    }
    s
}

fn latex_float(v: f64) -> String {
    let r = float_repr(v);
    match r.split_once('e') {
        Some((m, x)) => format!("{m} \\times 10^{{{x}}}"),
        None => r,
    }
}

fn latex(e: &Expr, out: &mut String) {
    let paren = |x: &Expr, min: u8, out: &mut String| {
        if prec(x) < min {
            out.push_str("\\left(");
            latex(x, out);
            out.push_str("\\right)");
        } else {
            latex(x, out);
        }
    };
    let func = |name: &str, args: &[&Expr], out: &mut String| {
        out.push_str(name);
        out.push_str("\\left(");
        for (k, a) in args.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            latex(a, out);
        }
        out.push_str("\\right)");
    };
    match e.node() {
        Node::Const(v) => out.push_str(&latex_float(*v)),
        Node::IntConst(v) => {
            let _ = write!(out, "{v}");
        }
        Node::Var(name) => out.push_str(&latex_symbol(name)),
        Node::Add(a, b) => {
            paren(a, P_ADD, out);
            out.push_str(" + ");
            paren(b, P_ADD, out);
        }
        Node::Sub(a, b) => {
            paren(a, P_ADD, out);
            out.push_str(" - ");
            paren(b, P_MUL, out);
        }
        Node::Mul(a, b) => {
            paren(a, P_MUL, out);
            out.push_str(" \\cdot ");
            paren(b, P_MUL, out);
        }
        Node::Div(a, b) => {
            out.push_str("\\frac{");
            latex(a, out);
            out.push_str("}{");
            latex(b, out);
            out.push('}');
        }
        Node::Pow(a, b) => {
            out.push('{');
            paren(a, P_ATOM, out);
            out.push_str("}^{");
            latex(b, out);
            out.push('}');
        }
        Node::Exp2(a) => {
            out.push_str("2^{");
            latex(a, out);
            out.push('}');
        }
        Node::Min(a, b) => func("\\min", &[a, b], out),
        Node::Max(a, b) => func("\\max", &[a, b], out),
        Node::Ceil(a) => {
            out.push_str("\\left\\lceil ");
            latex(a, out);
            out.push_str("\\right\\rceil");
        }
        Node::Floor(a) => {
            out.push_str("\\left\\lfloor ");
            latex(a, out);
            out.push_str("\\right\\rfloor");
        }
        Node::Log(a) => func("\\ln", &[a], out),
        Node::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            let _ = write!(out, "\\sum_{{{}=", latex_symbol(index));
            latex(lo, out);
            out.push_str("}^{");
            paren(hi, P_ADD, out);
            out.push_str(" - 1} ");
            paren(body, P_MUL, out);
        }
        Node::Cond {
            pred,
            then,
            otherwise,
        } => {
            out.push_str("\\begin{cases} ");
            latex(then, out);
            out.push_str(" & \\text{if } ");
            latex(pred, out);
            out.push_str(" \\\\ ");
            latex(otherwise, out);
            out.push_str(" & \\text{otherwise} \\end{cases}");
        }
        Node::Cmp(c, a, b) => {
            paren(a, P_ADD, out);
            let sym = match c {
                CmpOp::Lt => "<",
                CmpOp::Le => "\\le",
                CmpOp::Eq => "=",
                CmpOp::Ge => "\\ge",
                CmpOp::Gt => ">",
            };
            let _ = write!(out, " {sym} ");
            paren(b, P_ADD, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadError {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected `{0}`")]
    Unexpected(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("`{op}` takes {expected} arguments, got {got}")]
    Arity {
        op: String,
        expected: usize,
        got: usize,
    },
    #[error("division by constant zero")]
    ZeroDenominator,
    #[error("trailing input after expression")]
    Trailing,
}

fn tokenize(s: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                toks.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

/// Reads the s-expression syntax produced by `to_text(_, Sexpr)`. The result
/// is built exactly as written, without simplification.
pub fn parse_sexpr(s: &str) -> Result<Expr, ReadError> {
    let toks = tokenize(s);
    let mut pos = 0;
    let e = read(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(ReadError::Trailing);
    }
    Ok(e)
}

fn atom(tok: &str) -> Expr {
    if let Ok(v) = tok.parse::<i64>() {
        return Expr::int(v);
    }
    let numeric_shape = tok
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '.')
        || matches!(tok, "inf" | "NaN");
    if numeric_shape {
        if let Ok(v) = tok.parse::<f64>() {
            return Expr::num(v);
        }
    }
    Expr::var(tok)
}

fn read(toks: &[String], pos: &mut usize) -> Result<Expr, ReadError> {
    let tok = toks.get(*pos).ok_or(ReadError::UnexpectedEnd)?;
    *pos += 1;
    if tok == ")" {
        return Err(ReadError::Unexpected(tok.clone()));
    }
    if tok != "(" {
        return Ok(atom(tok));
    }
    let op = toks.get(*pos).ok_or(ReadError::UnexpectedEnd)?.clone();
    *pos += 1;
    if op == "sum" {
        let index = toks.get(*pos).ok_or(ReadError::UnexpectedEnd)?.clone();
        *pos += 1;
        let lo = read(toks, pos)?;
        let hi = read(toks, pos)?;
        let body = read(toks, pos)?;
        expect_close(toks, pos)?;
        return Ok(Expr::sum(index, lo, hi, body));
    }
    let mut args = Vec::new();
    loop {
        match toks.get(*pos) {
            None => return Err(ReadError::UnexpectedEnd),
            Some(t) if t == ")" => {
                *pos += 1;
                break;
            }
            Some(_) => args.push(read(toks, pos)?),
        }
    }
    let arity = |n: usize| -> Result<(), ReadError> {
        if args.len() == n {
            Ok(())
        } else {
            Err(ReadError::Arity {
                op: op.clone(),
                expected: n,
                got: args.len(),
            })
        }
    };
    let cmp = |c: CmpOp| -> Result<Expr, ReadError> {
        arity(2)?;
        Ok(Expr::cmp(c, args[0].clone(), args[1].clone()))
    };
    let bin = |f: fn(Expr, Expr) -> Expr| -> Result<Expr, ReadError> {
        arity(2)?;
        Ok(f(args[0].clone(), args[1].clone()))
    };
    let un = |f: fn(Expr) -> Expr| -> Result<Expr, ReadError> {
        arity(1)?;
        Ok(f(args[0].clone()))
    };
    match op.as_str() {
        "+" => bin(|a, b| a + b),
        "-" => bin(|a, b| a - b),
        "*" => bin(|a, b| a * b),
        "/" => {
            arity(2)?;
            Expr::try_div(args[0].clone(), args[1].clone()).map_err(|_| ReadError::ZeroDenominator)
        }
        "^" => bin(Expr::pow),
        "min" => bin(Expr::min),
        "max" => bin(Expr::max),
        "ceil" => un(Expr::ceil),
        "floor" => un(Expr::floor),
        "log" => un(Expr::log),
        "exp2" => un(Expr::exp2),
        "if" => {
            arity(3)?;
            Ok(Expr::cond(args[0].clone(), args[1].clone(), args[2].clone()))
        }
        "<" => cmp(CmpOp::Lt),
        "<=" => cmp(CmpOp::Le),
        "==" => cmp(CmpOp::Eq),
        ">=" => cmp(CmpOp::Ge),
        ">" => cmp(CmpOp::Gt),
        other => Err(ReadError::UnknownOperator(other.to_string())),
    }
}

fn expect_close(toks: &[String], pos: &mut usize) -> Result<(), ReadError> {
    match toks.get(*pos) {
        Some(t) if t == ")" => {
            *pos += 1;
            Ok(())
        }
        Some(t) => Err(ReadError::Unexpected(t.clone())),
        None => Err(ReadError::UnexpectedEnd),
    }
}
