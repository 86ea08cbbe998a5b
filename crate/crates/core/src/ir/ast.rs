use serde::{Deserialize, Serialize};

use crate::symexpr::Expr;

/// Classical expressions share the symbolic node menu (without `Sum`).
pub type CExpr = Expr;

/// Source position, 1-based. Ignored by equality and by the JSON form.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Int,
    Real,
    Qureg,
}

impl ParamKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ParamKind::Int => "int",
            ParamKind::Real => "real",
            ParamKind::Qureg => "qureg",
        }
    }

    /// Value substituted for a don't-care argument of this kind.
    pub fn default_value(self) -> CExpr {
        match self {
            ParamKind::Real => Expr::num(0.0),
            ParamKind::Int | ParamKind::Qureg => Expr::int(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub dont_care: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, kind: ParamKind) -> Param {
        Param {
            name: name.into(),
            kind,
            dont_care: false,
        }
    }

    pub fn dont_care(name: impl Into<String>, kind: ParamKind) -> Param {
        Param {
            name: name.into(),
            kind,
            dont_care: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stmt {
    #[serde(flatten)]
    pub kind: StmtKind,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all_fields = "camelCase")]
pub enum StmtKind {
    GateCall {
        gate: String,
        args: Vec<CExpr>,
    },
    Call {
        callee: String,
        args: Vec<CExpr>,
    },
    /// Half-open range `lo..hi`.
    For {
        index: String,
        lo: CExpr,
        hi: CExpr,
        body: Vec<Stmt>,
    },
    If {
        cond: CExpr,
        then_body: Vec<Stmt>,
        #[serde(default)]
        else_body: Vec<Stmt>,
    },
    EpsilonDecl {
        name: String,
    },
    Let {
        name: String,
        value: CExpr,
    },
    MeasureBranch {
        then_body: Vec<Stmt>,
        #[serde(default)]
        else_body: Vec<Stmt>,
    },
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            kind,
            span: Span::default(),
        }
    }

    pub fn at(kind: StmtKind, span: Span) -> Stmt {
        Stmt { kind, span }
    }

    /// Nested statement lists, in source order.
    pub fn blocks(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::For { body, .. } => vec![body],
            StmtKind::If {
                then_body,
                else_body,
                ..
            }
            | StmtKind::MeasureBranch {
                then_body,
                else_body,
            } => vec![then_body, else_body],
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subroutine {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    #[serde(skip)]
    pub span: Span,
}

impl Subroutine {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }
}

pub const DEFAULT_GATESET_REF: &str = "clifford_t";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Program {
    pub subroutines: Vec<Subroutine>,
    pub entry_name: String,
    #[serde(default = "default_gateset_ref")]
    pub gate_set_ref: String,
}

fn default_gateset_ref() -> String {
    DEFAULT_GATESET_REF.to_string()
}

impl Program {
    /// Builds a program whose entry is `main` if present, otherwise the last
    /// subroutine.
    pub fn new(subroutines: Vec<Subroutine>) -> Program {
        let entry_name = if subroutines.iter().any(|s| s.name == "main") {
            "main".to_string()
        } else {
            subroutines.last().map(|s| s.name.clone()).unwrap_or_default()
        };
        Program {
            subroutines,
            entry_name,
            gate_set_ref: default_gateset_ref(),
        }
    }

    pub fn subroutine(&self, name: &str) -> Option<&Subroutine> {
        self.subroutines.iter().find(|s| s.name == name)
    }

    pub fn entry(&self) -> Option<&Subroutine> {
        self.subroutine(&self.entry_name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("AST serializes")
    }

    pub fn from_json(text: &str) -> Result<Program, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Visits every statement in `body`, depth first, in source order.
pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for s in body {
        f(s);
        for b in s.blocks() {
            walk_stmts(b, f);
        }
    }
}
