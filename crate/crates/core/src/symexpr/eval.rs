use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Expr, Node};

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Env(HashMap<String, f64>);

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Env {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<f64> {
        self.0.remove(name)
    }

    pub fn extend(&mut self, other: &Env) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), *v);
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bindings sorted by name.
    pub fn sorted(&self) -> BTreeMap<String, f64> {
        self.0.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }
}

impl FromIterator<(String, f64)> for Env {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Env {
        Env(iter.into_iter().collect())
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Env {
    fn from_iter<I: IntoIterator<Item = (&'a str, f64)>>(iter: I) -> Env {
        Env(iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("missing value for variable `{0}`")]
    MissingVariable(String),
    #[error("non-finite result while evaluating {0}")]
    NonFiniteResult(String),
}

/// Evaluates `expr` under `env`. Sums are iterated, conditionals evaluate
/// exactly one branch.
pub fn evaluate(expr: &Expr, env: &Env) -> Result<f64, EvalError> {
    let mut locals = Vec::new();
    eval(expr, env, &mut locals)
}

fn lookup(name: &str, env: &Env, locals: &[(String, f64)]) -> Result<f64, EvalError> {
    if let Some((_, v)) = locals.iter().rev().find(|(n, _)| n == name) {
        return Ok(*v);
    }
    env.get(name)
        .ok_or_else(|| EvalError::MissingVariable(name.to_string()))
}

fn finite(v: f64, what: &str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFiniteResult(what.to_string()))
    }
}

fn eval(expr: &Expr, env: &Env, locals: &mut Vec<(String, f64)>) -> Result<f64, EvalError> {
    match expr.node() {
        Node::Const(v) => finite(*v, "constant"),
        Node::IntConst(v) => Ok(*v as f64),
        Node::Var(name) => lookup(name, env, locals),
        Node::Add(a, b) => finite(eval(a, env, locals)? + eval(b, env, locals)?, "addition"),
        Node::Sub(a, b) => finite(eval(a, env, locals)? - eval(b, env, locals)?, "subtraction"),
        Node::Mul(a, b) => finite(eval(a, env, locals)? * eval(b, env, locals)?, "product"),
        Node::Div(a, b) => {
            let num = eval(a, env, locals)?;
            let den = eval(b, env, locals)?;
            if den == 0.0 {
                return Err(EvalError::NonFiniteResult("division by zero".into()));
            }
            finite(num / den, "division")
        }
        Node::Pow(a, b) => {
            let base = eval(a, env, locals)?;
            let exp = eval(b, env, locals)?;
            finite(base.powf(exp), "power")
        }
        Node::Min(a, b) => Ok(eval(a, env, locals)?.min(eval(b, env, locals)?)),
        Node::Max(a, b) => Ok(eval(a, env, locals)?.max(eval(b, env, locals)?)),
        Node::Ceil(a) => Ok(eval(a, env, locals)?.ceil()),
        Node::Floor(a) => Ok(eval(a, env, locals)?.floor()),
        Node::Log(a) => {
            let v = eval(a, env, locals)?;
            if v <= 0.0 {
                return Err(EvalError::NonFiniteResult(format!("log of {v}")));
            }
            finite(v.ln(), "logarithm")
        }
        Node::Exp2(a) => finite(eval(a, env, locals)?.exp2(), "exp2"),
        Node::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            let lo = eval(lo, env, locals)?.ceil();
            let hi = eval(hi, env, locals)?;
            let mut total = 0.0;
            let mut i = lo;
            while i < hi {
                locals.push((index.clone(), i));
                let term = eval(body, env, locals);
                locals.pop();
                total += term?;
                i += 1.0;
            }
            finite(total, "sum")
        }
        Node::Cond {
            pred,
            then,
            otherwise,
        } => {
            if eval(pred, env, locals)? != 0.0 {
                eval(then, env, locals)
            } else {
                eval(otherwise, env, locals)
            }
        }
        Node::Cmp(op, a, b) => {
            let l = eval(a, env, locals)?;
            let r = eval(b, env, locals)?;
            Ok(if op.holds(l, r) { 1.0 } else { 0.0 })
        }
    }
}

/// Exact rational evaluation over integer bindings. Returns `None` when the
/// expression leaves the rational fragment (logs, floats, fractional powers)
/// or an intermediate overflows.
pub fn evaluate_exact(expr: &Expr, env: &HashMap<String, i128>) -> Option<Ratio<i128>> {
    let mut locals = Vec::new();
    exact(expr, env, &mut locals)
}

fn exact(
    expr: &Expr,
    env: &HashMap<String, i128>,
    locals: &mut Vec<(String, i128)>,
) -> Option<Ratio<i128>> {
    match expr.node() {
        Node::IntConst(v) => Some(Ratio::from_integer(*v as i128)),
        Node::Var(name) => locals
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .or_else(|| env.get(name).copied())
            .map(Ratio::from_integer),
        Node::Add(a, b) => exact(a, env, locals)?.checked_add(&exact(b, env, locals)?),
        Node::Sub(a, b) => exact(a, env, locals)?.checked_sub(&exact(b, env, locals)?),
        Node::Mul(a, b) => exact(a, env, locals)?.checked_mul(&exact(b, env, locals)?),
        Node::Div(a, b) => {
            let den = exact(b, env, locals)?;
            if *den.numer() == 0 {
                return None;
            }
            exact(a, env, locals)?.checked_div(&den)
        }
        Node::Pow(a, b) => {
            let base = exact(a, env, locals)?;
            let e = exact(b, env, locals)?;
            if !e.is_integer() || *e.numer() < 0 || *e.numer() > 64 {
                return None;
            }
            let mut acc = Ratio::from_integer(1i128);
            for _ in 0..*e.numer() {
                acc = acc.checked_mul(&base)?;
            }
            Some(acc)
        }
        Node::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            let lo = exact(lo, env, locals)?;
            let hi = exact(hi, env, locals)?;
            if !lo.is_integer() || !hi.is_integer() {
                return None;
            }
            let mut total = Ratio::from_integer(0i128);
            for i in *lo.numer()..*hi.numer() {
                locals.push((index.clone(), i));
                let term = exact(body, env, locals);
                locals.pop();
                total = total.checked_add(&term?)?;
            }
            Some(total)
        }
        _ => None,
    }
}
