//! The DSL front end: syntax tree, parser, pretty-printer, validation and
//! gate-set models.

mod ast;
mod gateset;
mod parser;
mod printer;
mod validate;

pub use ast::{
    walk_stmts, CExpr, Param, ParamKind, Program, Span, Stmt, StmtKind, Subroutine,
    DEFAULT_GATESET_REF,
};
pub use gateset::{rotation_cost, ConfigError, GateDef, GateSet};
pub use parser::{parse, parse_cexpr, ParseError};
pub use printer::emit_cexpr;
pub(crate) use printer::emit_header;
pub use validate::{validate, Diagnostic, DiagnosticKind};

/// Renders a program as DSL source that parses back to the same AST.
pub fn emit(p: &Program) -> String {
    printer::emit(p)
}

/// Parses a gate-set configuration; see [`GateSet::load`].
pub fn load_gateset(doc: &str) -> Result<GateSet, ConfigError> {
    GateSet::load(doc)
}
