//! Lexer and recursive-descent parser for the DSL.

use std::collections::HashSet;

use thiserror::Error;

use super::ast::{CExpr, Param, ParamKind, Program, Span, Stmt, StmtKind, Subroutine};
use crate::symexpr::{CmpOp, Expr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: expected {expected}, found {found}")]
    SyntaxError {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: duplicate definition of `{name}`")]
    DuplicateDefinition { name: String, line: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    DontCare,
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Float(v) => format!("`{v:?}`"),
            Tok::DontCare => "`@dontcare`".into(),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

const SYMBOLS: [&str; 20] = [
    "..", "<=", ">=", "==", "(", ")", "{", "}", ",", ";", ":", "=", "+", "-", "*", "/", "^", "<",
    ">", "@",
];

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, expected: &str, found: String| ParseError::SyntaxError {
        line,
        col,
        expected: expected.into(),
        found,
    };
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            out.push((Tok::Ident(word), span));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let mut is_float = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            // A '.' followed by another '.' is a range, not a decimal point.
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1) != Some(&'.') {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| err(span.line, span.col, "number", text.clone()))?)
            } else {
                match text.parse::<i64>() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => Tok::Float(
                        text.parse()
                            .map_err(|_| err(span.line, span.col, "number", text.clone()))?,
                    ),
                }
            };
            out.push((tok, span));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(&"@") => {
                i += 1;
                let ws = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let word: String = chars[ws..i].iter().collect();
                col += i - start;
                if word != "dontcare" {
                    return Err(err(span.line, span.col, "`@dontcare`", format!("`@{word}`")));
                }
                out.push((Tok::DontCare, span));
            }
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push((Tok::Sym(s), span));
            }
            None => return Err(err(line, col, "token", format!("`{c}`"))),
        }
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

const RESERVED: [&str; 10] = [
    "def", "epsilon", "let", "for", "in", "if", "else", "ifmeasure", "pi", "inc",
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        let s = self.span();
        Err(ParseError::SyntaxError {
            line: s.line,
            col: s.col,
            expected: expected.into(),
            found: self.peek().describe(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.fail(&format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.fail(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                let name = name.clone();
                self.bump();
                Ok(name)
            }
            _ => self.fail("identifier"),
        }
    }

    fn program(&mut self) -> Result<Vec<Subroutine>, ParseError> {
        let mut subs: Vec<Subroutine> = Vec::new();
        while *self.peek() != Tok::Eof {
            let span = self.span();
            let sub = self.subroutine()?;
            if subs.iter().any(|s| s.name == sub.name) {
                return Err(ParseError::DuplicateDefinition {
                    name: sub.name,
                    line: span.line,
                    col: span.col,
                });
            }
            subs.push(sub);
        }
        if subs.is_empty() {
            return self.fail("`def`");
        }
        Ok(subs)
    }

    fn subroutine(&mut self) -> Result<Subroutine, ParseError> {
        let span = self.span();
        self.expect_kw("def")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                params.push(self.param()?);
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let body = self.block()?;
        Ok(Subroutine {
            name,
            params,
            body,
            span,
        })
    }

    fn param(&mut self) -> Result<Param, ParseError> {
        let dont_care = if *self.peek() == Tok::DontCare {
            self.bump();
            true
        } else {
            false
        };
        let name = self.ident()?;
        self.expect_sym(":")?;
        let kind = match self.peek() {
            Tok::Ident(k) if k == "int" => ParamKind::Int,
            Tok::Ident(k) if k == "real" => ParamKind::Real,
            Tok::Ident(k) if k == "qureg" => ParamKind::Qureg,
            _ => return self.fail("`int`, `real` or `qureg`"),
        };
        self.bump();
        Ok(Param {
            name,
            kind,
            dont_care,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if *self.peek() == Tok::Eof {
                return self.fail("`}`");
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn else_block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if !self.is_kw("else") {
            return Ok(Vec::new());
        }
        self.bump();
        if self.is_kw("if") {
            return Ok(vec![self.stmt()?]);
        }
        self.block()
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        let kind = if self.is_kw("epsilon") {
            self.bump();
            let name = self.ident()?;
            self.expect_sym(";")?;
            StmtKind::EpsilonDecl { name }
        } else if self.is_kw("let") {
            self.bump();
            let name = self.ident()?;
            self.expect_sym("=")?;
            let value = self.cexpr()?;
            self.expect_sym(";")?;
            StmtKind::Let { name, value }
        } else if self.is_kw("for") {
            self.bump();
            let index = self.ident()?;
            self.expect_kw("in")?;
            let lo = self.arith()?;
            self.expect_sym("..")?;
            let hi = self.arith()?;
            let body = self.block()?;
            StmtKind::For {
                index,
                lo,
                hi,
                body,
            }
        } else if self.is_kw("if") {
            self.bump();
            let cond = self.cexpr()?;
            let then_body = self.block()?;
            let else_body = self.else_block()?;
            StmtKind::If {
                cond,
                then_body,
                else_body,
            }
        } else if self.is_kw("ifmeasure") {
            self.bump();
            let then_body = self.block()?;
            let else_body = self.else_block()?;
            StmtKind::MeasureBranch {
                then_body,
                else_body,
            }
        } else {
            let name = self.ident().or_else(|_| self.fail("statement"))?;
            let args = self.call_args()?;
            self.expect_sym(";")?;
            // Resolved to Call or GateCall once all subroutines are known.
            StmtKind::GateCall { gate: name, args }
        };
        Ok(Stmt::at(kind, span))
    }

    fn call_args(&mut self) -> Result<Vec<CExpr>, ParseError> {
        self.expect_sym("(")?;
        let mut args = Vec::new();
        if !self.is_sym(")") {
            loop {
                args.push(self.cexpr()?);
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(args)
    }

    fn cexpr(&mut self) -> Result<CExpr, ParseError> {
        let lhs = self.arith()?;
        let op = match self.peek() {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym(">") => CmpOp::Gt,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.arith()?;
        Ok(Expr::cmp(op, lhs, rhs))
    }

    fn arith(&mut self) -> Result<CExpr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.is_sym("+") {
                self.bump();
                acc = acc + self.term()?;
            } else if self.is_sym("-") {
                self.bump();
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<CExpr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.is_sym("*") {
                self.bump();
                acc = acc * self.unary()?;
            } else if self.is_sym("/") {
                let span = self.span();
                self.bump();
                let rhs = self.unary()?;
                acc = Expr::try_div(acc, rhs).map_err(|_| ParseError::SyntaxError {
                    line: span.line,
                    col: span.col,
                    expected: "nonzero divisor".into(),
                    found: "`0`".into(),
                })?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<CExpr, ParseError> {
        if self.is_sym("-") {
            self.bump();
            let inner = self.unary()?;
            return Ok(match inner.node() {
                crate::symexpr::Node::IntConst(v) if *v != i64::MIN => Expr::int(-v),
                crate::symexpr::Node::Const(v) => Expr::num(-v),
                _ => Expr::int(-1) * inner,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<CExpr, ParseError> {
        let base = self.primary()?;
        if self.is_sym("^") {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::pow(base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<CExpr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::int(v))
            }
            Tok::Float(v) => {
                self.bump();
                Ok(Expr::num(v))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.cexpr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "pi" => {
                self.bump();
                Ok(Expr::num(std::f64::consts::PI))
            }
            Tok::Ident(name) if self.toks[self.pos + 1].0 == Tok::Sym("(") => {
                let f = FUNCTIONS.iter().find(|(n, _)| *n == name);
                let Some((_, arity)) = f else {
                    return self.fail("function name");
                };
                self.bump();
                let args = self.call_args()?;
                let bad = match arity {
                    Arity::One => args.len() != 1,
                    Arity::AtLeastTwo => args.len() < 2,
                };
                if bad {
                    self.pos -= 1;
                    return self.fail(&format!("arguments matching `{name}`"));
                }
                Ok(apply_function(&name, args))
            }
            Tok::Ident(_) => Ok(Expr::var(self.ident()?)),
            _ => self.fail("expression"),
        }
    }
}

enum Arity {
    One,
    AtLeastTwo,
}

const FUNCTIONS: [(&str, Arity); 7] = [
    ("min", Arity::AtLeastTwo),
    ("max", Arity::AtLeastTwo),
    ("ceil", Arity::One),
    ("floor", Arity::One),
    ("log", Arity::One),
    ("log2", Arity::One),
    ("exp2", Arity::One),
];

fn apply_function(name: &str, args: Vec<CExpr>) -> CExpr {
    let mut it = args.into_iter();
    let first = it.next().expect("arity checked");
    match name {
        "min" => it.fold(first, Expr::min),
        "max" => it.fold(first, Expr::max),
        "ceil" => Expr::ceil(first),
        "floor" => Expr::floor(first),
        "log" => Expr::log(first),
        "log2" => Expr::log2(first),
        "exp2" => Expr::exp2(first),
        _ => unreachable!("unknown function {name}"),
    }
}

fn classify(body: &mut [Stmt], subs: &HashSet<String>) {
    for s in body {
        if let StmtKind::GateCall { gate, args } = &s.kind {
            if subs.contains(gate) {
                s.kind = StmtKind::Call {
                    callee: gate.clone(),
                    args: args.clone(),
                };
            }
        }
        match &mut s.kind {
            StmtKind::For { body, .. } => classify(body, subs),
            StmtKind::If {
                then_body,
                else_body,
                ..
            }
            | StmtKind::MeasureBranch {
                then_body,
                else_body,
            } => {
                classify(then_body, subs);
                classify(else_body, subs);
            }
            _ => {}
        }
    }
}

/// Parses DSL source text. Calls naming one of the program's subroutines
/// become `Call`s, every other call is a `GateCall`.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let mut subs = p.program()?;
    let names: HashSet<String> = subs.iter().map(|s| s.name.clone()).collect();
    for s in &mut subs {
        classify(&mut s.body, &names);
    }
    Ok(Program::new(subs))
}

/// Parses a standalone classical expression.
pub fn parse_cexpr(src: &str) -> Result<CExpr, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let e = p.cexpr()?;
    if *p.peek() != Tok::Eof {
        return p.fail("end of expression");
    }
    Ok(e)
}
