//! Immutable symbolic expressions: the currency of every cost and error
//! estimate produced by the compiler.
//!
//! An [`Expr`] is a reference-counted node. Cloning is cheap and subterms are
//! shared between the expressions built from them, so a summary of a large
//! program is a DAG rather than a tree. Every node caches its structural hash,
//! which makes equality checks on shared or unequal subterms fast.

mod eval;
mod equiv;
mod interval;
mod num;
mod poly;
mod simplify;
mod sum;
mod text;

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use eval::{evaluate, evaluate_exact, Env, EvalError};
pub use equiv::{equivalence_check, VarDomain};
pub use interval::{Bounds, Interval};
pub use num::Num;
pub use poly::{expand, to_poly_in};
pub use simplify::simplify;
pub use sum::{faulhaber, sum_elim, sum_elim_with, SumError, SummaryKind};
pub use text::{parse_sexpr, to_text, ReadError, TextFormat};

/// Comparison operators usable in predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    /// The operator obtained by swapping the operands (`a < b` ⇔ `b > a`).
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Gt => CmpOp::Lt,
        }
    }
}

/// One node of a symbolic expression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Const(f64),
    IntConst(i64),
    Var(String),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Min(Expr, Expr),
    Max(Expr, Expr),
    Ceil(Expr),
    Floor(Expr),
    /// Natural logarithm.
    Log(Expr),
    Exp2(Expr),
    /// `Σ_{index = lo}^{hi - 1} body`; the range is half-open.
    Sum {
        index: String,
        lo: Expr,
        hi: Expr,
        body: Expr,
    },
    Cond {
        pred: Expr,
        then: Expr,
        otherwise: Expr,
    },
    Cmp(CmpOp, Expr, Expr),
}

struct Inner {
    node: Node,
    hash: u64,
}

/// A shared, immutable expression.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("division by constant zero")]
    DivisionByZero,
}

impl Expr {
    pub fn new(node: Node) -> Expr {
        let mut h = DefaultHasher::new();
        hash_node(&node, &mut h);
        Expr(Arc::new(Inner {
            hash: h.finish(),
            node,
        }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn num(v: f64) -> Expr {
        // -0.0 and 0.0 are the same constant.
        Expr::new(Node::Const(if v == 0.0 { 0.0 } else { v }))
    }

    pub fn int(v: i64) -> Expr {
        Expr::new(Node::IntConst(v))
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::new(Node::Var(name.into()))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    /// Builds `lhs / rhs`, refusing a literal zero denominator.
    pub fn try_div(lhs: Expr, rhs: Expr) -> Result<Expr, ExprError> {
        if rhs.is_zero_const() {
            return Err(ExprError::DivisionByZero);
        }
        Ok(Expr::new(Node::Div(lhs, rhs)))
    }

    /// Division for callers that already know the denominator is not a
    /// literal zero.
    pub(crate) fn div_nonzero(lhs: Expr, rhs: Expr) -> Expr {
        debug_assert!(!rhs.is_zero_const());
        Expr::new(Node::Div(lhs, rhs))
    }

    pub fn pow(base: Expr, exp: Expr) -> Expr {
        Expr::new(Node::Pow(base, exp))
    }

    pub fn min(a: Expr, b: Expr) -> Expr {
        Expr::new(Node::Min(a, b))
    }

    pub fn max(a: Expr, b: Expr) -> Expr {
        Expr::new(Node::Max(a, b))
    }

    pub fn ceil(a: Expr) -> Expr {
        Expr::new(Node::Ceil(a))
    }

    pub fn floor(a: Expr) -> Expr {
        Expr::new(Node::Floor(a))
    }

    pub fn log(a: Expr) -> Expr {
        Expr::new(Node::Log(a))
    }

    /// `log₂(a)`, represented as `log(a) / log(2)`.
    pub fn log2(a: Expr) -> Expr {
        Expr::div_nonzero(Expr::log(a), Expr::log(Expr::int(2)))
    }

    pub fn exp2(a: Expr) -> Expr {
        Expr::new(Node::Exp2(a))
    }

    pub fn sum(index: impl Into<String>, lo: Expr, hi: Expr, body: Expr) -> Expr {
        Expr::new(Node::Sum {
            index: index.into(),
            lo,
            hi,
            body,
        })
    }

    pub fn cond(pred: Expr, then: Expr, otherwise: Expr) -> Expr {
        Expr::new(Node::Cond {
            pred,
            then,
            otherwise,
        })
    }

    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::new(Node::Cmp(op, lhs, rhs))
    }

    /// The numeric value of a constant node.
    pub fn as_num(&self) -> Option<Num> {
        match self.node() {
            Node::Const(v) => Some(Num::Float(*v)),
            Node::IntConst(v) => Some(Num::int(*v)),
            // The printed form of a rational constant.
            Node::Div(a, b) => match (a.node(), b.node()) {
                (Node::IntConst(p), Node::IntConst(q)) if *q != 0 => Some(Num::Rat(num_rational::Ratio::new(*p, *q))),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.as_num().map(Num::to_f64)
    }

    pub fn is_zero_const(&self) -> bool {
        self.as_num().is_some_and(|n| n.is_zero())
    }

    pub fn is_one_const(&self) -> bool {
        self.as_num().is_some_and(|n| n.is_one())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self.node() {
            Node::Var(name) => Some(name),
            _ => None,
        }
    }

    /// Direct children, in field order.
    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Const(_) | Node::IntConst(_) | Node::Var(_) => vec![],
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b)
            | Node::Min(a, b)
            | Node::Max(a, b)
            | Node::Cmp(_, a, b) => vec![a, b],
            Node::Ceil(a) | Node::Floor(a) | Node::Log(a) | Node::Exp2(a) => vec![a],
            Node::Sum { lo, hi, body, .. } => vec![lo, hi, body],
            Node::Cond {
                pred,
                then,
                otherwise,
            } => vec![pred, then, otherwise],
        }
    }

    /// Whether `name` occurs free in the expression.
    pub fn mentions(&self, name: &str) -> bool {
        match self.node() {
            Node::Var(v) => v == name,
            Node::Sum {
                index,
                lo,
                hi,
                body,
            } => lo.mentions(name) || hi.mentions(name) || (index != name && body.mentions(name)),
            _ => self.children().into_iter().any(|c| c.mentions(name)),
        }
    }

    /// True if the expression contains a `Sum` or `Cond` node.
    pub fn has_residual_control_flow(&self) -> bool {
        match self.node() {
            Node::Sum { .. } | Node::Cond { .. } => true,
            _ => self
                .children()
                .into_iter()
                .any(Expr::has_residual_control_flow),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(Expr::node_count)
            .sum::<usize>()
    }

    /// Replaces free occurrences of variables according to `map`.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        let mut cache = HashMap::new();
        self.subst_inner(map, &mut cache)
    }

    fn subst_inner(&self, map: &HashMap<String, Expr>, cache: &mut HashMap<usize, Expr>) -> Expr {
        let key = Arc::as_ptr(&self.0) as usize;
        if let Some(hit) = cache.get(&key) {
            return hit.clone();
        }
        let out = match self.node() {
            Node::Var(name) => map.get(name).cloned().unwrap_or_else(|| self.clone()),
            Node::Const(_) | Node::IntConst(_) => self.clone(),
            Node::Sum {
                index,
                lo,
                hi,
                body,
            } => {
                let lo = lo.subst_inner(map, cache);
                let hi = hi.subst_inner(map, cache);
                let body = if map.contains_key(index) {
                    let mut inner = map.clone();
                    inner.remove(index);
                    body.substitute(&inner)
                } else {
                    body.subst_inner(map, cache)
                };
                Expr::sum(index.clone(), lo, hi, body)
            }
            _ => self.map_children(|c| c.subst_inner(map, cache)),
        };
        cache.insert(key, out.clone());
        out
    }

    /// Rebuilds the node with every child replaced by `f(child)`. Sum indices
    /// are kept as they are.
    pub fn map_children(&self, mut f: impl FnMut(&Expr) -> Expr) -> Expr {
        let node = match self.node() {
            Node::Const(_) | Node::IntConst(_) | Node::Var(_) => return self.clone(),
            Node::Add(a, b) => Node::Add(f(a), f(b)),
            Node::Sub(a, b) => Node::Sub(f(a), f(b)),
            Node::Mul(a, b) => Node::Mul(f(a), f(b)),
            Node::Div(a, b) => Node::Div(f(a), f(b)),
            Node::Pow(a, b) => Node::Pow(f(a), f(b)),
            Node::Min(a, b) => Node::Min(f(a), f(b)),
            Node::Max(a, b) => Node::Max(f(a), f(b)),
            Node::Cmp(op, a, b) => Node::Cmp(*op, f(a), f(b)),
            Node::Ceil(a) => Node::Ceil(f(a)),
            Node::Floor(a) => Node::Floor(f(a)),
            Node::Log(a) => Node::Log(f(a)),
            Node::Exp2(a) => Node::Exp2(f(a)),
            Node::Sum {
                index,
                lo,
                hi,
                body,
            } => Node::Sum {
                index: index.clone(),
                lo: f(lo),
                hi: f(hi),
                body: f(body),
            },
            Node::Cond {
                pred,
                then,
                otherwise,
            } => Node::Cond {
                pred: f(pred),
                then: f(then),
                otherwise: f(otherwise),
            },
        };
        Expr::new(node)
    }
}

/// Free variables of `expr`; bound `Sum` indices are excluded.
pub fn free_vars(expr: &Expr) -> BTreeSet<String> {
    fn walk(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match e.node() {
            Node::Var(v) => {
                if !bound.iter().any(|b| b == v) {
                    out.insert(v.clone());
                }
            }
            Node::Sum {
                index,
                lo,
                hi,
                body,
            } => {
                walk(lo, bound, out);
                walk(hi, bound, out);
                bound.push(index.clone());
                walk(body, bound, out);
                bound.pop();
            }
            _ => {
                for c in e.children() {
                    walk(c, bound, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(expr, &mut Vec::new(), &mut out);
    out
}

fn hash_node<H: Hasher>(node: &Node, h: &mut H) {
    std::mem::discriminant(node).hash(h);
    match node {
        Node::Const(v) => v.to_bits().hash(h),
        Node::IntConst(v) => v.hash(h),
        Node::Var(name) => name.hash(h),
        Node::Sum { index, .. } => index.hash(h),
        Node::Cmp(op, _, _) => op.hash(h),
        _ => {}
    }
    let children: Vec<&Expr> = match node {
        Node::Const(_) | Node::IntConst(_) | Node::Var(_) => vec![],
        Node::Add(a, b)
        | Node::Sub(a, b)
        | Node::Mul(a, b)
        | Node::Div(a, b)
        | Node::Pow(a, b)
        | Node::Min(a, b)
        | Node::Max(a, b)
        | Node::Cmp(_, a, b) => vec![a, b],
        Node::Ceil(a) | Node::Floor(a) | Node::Log(a) | Node::Exp2(a) => vec![a],
        Node::Sum { lo, hi, body, .. } => vec![lo, hi, body],
        Node::Cond {
            pred,
            then,
            otherwise,
        } => vec![pred, then, otherwise],
    };
    for c in children {
        c.0.hash.hash(h);
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        if self.0.hash != other.0.hash {
            return false;
        }
        match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => a.to_bits() == b.to_bits(),
            (Node::IntConst(a), Node::IntConst(b)) => a == b,
            (Node::Var(a), Node::Var(b)) => a == b,
            (
                Node::Sum {
                    index: i1,
                    lo: l1,
                    hi: h1,
                    body: b1,
                },
                Node::Sum {
                    index: i2,
                    lo: l2,
                    hi: h2,
                    body: b2,
                },
            ) => i1 == i2 && l1 == l2 && h1 == h2 && b1 == b2,
            (Node::Cmp(o1, a1, b1), Node::Cmp(o2, a2, b2)) => o1 == o2 && a1 == a2 && b1 == b2,
            (a, b) => {
                std::mem::discriminant(a) == std::mem::discriminant(b)
                    && self
                        .children()
                        .iter()
                        .zip(other.children().iter())
                        .all(|(x, y)| x == y)
            }
        }
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state);
    }
}

fn kind_rank(node: &Node) -> u8 {
    match node {
        Node::IntConst(_) | Node::Const(_) => 0,
        Node::Var(_) => 1,
        Node::Pow(..) => 2,
        Node::Exp2(_) => 3,
        Node::Log(_) => 4,
        Node::Ceil(_) => 5,
        Node::Floor(_) => 6,
        Node::Min(..) => 7,
        Node::Max(..) => 8,
        Node::Mul(..) => 9,
        Node::Div(..) => 10,
        Node::Add(..) => 11,
        Node::Sub(..) => 12,
        Node::Sum { .. } => 13,
        Node::Cond { .. } => 14,
        Node::Cmp(..) => 15,
    }
}

impl Ord for Expr {
    /// Canonical total order used to sort commutative operands.
    fn cmp(&self, other: &Expr) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        let (a, b) = (self.node(), other.node());
        kind_rank(a).cmp(&kind_rank(b)).then_with(|| match (a, b) {
            (Node::IntConst(x), Node::IntConst(y)) => x.cmp(y),
            (Node::IntConst(x), Node::Const(y)) => (*x as f64).total_cmp(y).then(Ordering::Less),
            (Node::Const(x), Node::IntConst(y)) => x.total_cmp(&(*y as f64)).then(Ordering::Greater),
            (Node::Const(x), Node::Const(y)) => x.total_cmp(y),
            (Node::Var(x), Node::Var(y)) => x.cmp(y),
            (Node::Sum { index: i1, .. }, Node::Sum { index: i2, .. }) => i1
                .cmp(i2)
                .then_with(|| self.children().cmp(&other.children())),
            (Node::Cmp(o1, ..), Node::Cmp(o2, ..)) => o1
                .cmp(o2)
                .then_with(|| self.children().cmp(&other.children())),
            _ => self.children().cmp(&other.children()),
        })
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Expr) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::write_raw(self, TextFormat::Sexpr))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::write_raw(self, TextFormat::Wolfram))
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.node().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        Node::deserialize(d).map(Expr::new)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Expr {
        Expr::int(v)
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::num(v)
    }
}

impl From<&str> for Expr {
    fn from(v: &str) -> Expr {
        Expr::var(v)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::new(Node::Add(self, rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::new(Node::Sub(self, rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::new(Node::Mul(self, rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::new(Node::Mul(Expr::int(-1), self))
    }
}
