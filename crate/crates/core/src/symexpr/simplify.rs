//! Value-preserving canonicalization: constant folding, algebraic
//! identities, flattening of sums and products with like-term collection and
//! a canonical operand order.

use std::collections::HashMap;
use std::sync::Arc;

use super::{CmpOp, Expr, Node, Num};

/// Returns a canonical, value-preserving form of `expr`.
pub fn simplify(expr: &Expr) -> Expr {
    Simplifier::default().go(expr)
}

#[derive(Default)]
struct Simplifier {
    cache: HashMap<usize, Expr>,
}

impl Simplifier {
    fn go(&mut self, e: &Expr) -> Expr {
        let key = Arc::as_ptr(&e.0) as usize;
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let out = self.step(e);
        self.cache.insert(key, out.clone());
        out
    }

    fn step(&mut self, e: &Expr) -> Expr {
        match e.node() {
            Node::Const(_) | Node::IntConst(_) | Node::Var(_) => e.clone(),
            Node::Add(a, b) => {
                let (a, b) = (self.go(a), self.go(b));
                build_sum(&[(Num::int(1), a), (Num::int(1), b)])
            }
            Node::Sub(a, b) => {
                let (a, b) = (self.go(a), self.go(b));
                build_sum(&[(Num::int(1), a), (Num::int(-1), b)])
            }
            Node::Mul(a, b) => {
                let (a, b) = (self.go(a), self.go(b));
                build_product(&[(a, 1), (b, 1)]).unwrap_or_else(|| e.clone())
            }
            Node::Div(a, b) => {
                let (a, b) = (self.go(a), self.go(b));
                build_product(&[(a, 1), (b, -1)]).unwrap_or_else(|| e.clone())
            }
            Node::Pow(a, b) => {
                let (a, b) = (self.go(a), self.go(b));
                fold_pow(a, b)
            }
            Node::Min(a, b) => {
                let (a, b) = (self.go(a), self.go(b));
                fold_extremum(a, b, true)
            }
            Node::Max(a, b) => {
                let (a, b) = (self.go(a), self.go(b));
                fold_extremum(a, b, false)
            }
            Node::Ceil(a) => round(self.go(a), f64::ceil, Expr::ceil),
            Node::Floor(a) => round(self.go(a), f64::floor, Expr::floor),
            Node::Log(a) => {
                let a = self.go(a);
                match a.as_f64() {
                    Some(v) if v == 1.0 => Expr::zero(),
                    Some(v) if v > 0.0 => Expr::num(v.ln()),
                    _ => Expr::log(a),
                }
            }
            Node::Exp2(a) => {
                let a = self.go(a);
                match a.as_num() {
                    Some(n) => match n.as_integer() {
                        Some(k) if (0..=62).contains(&k) => Expr::int(1i64 << k),
                        _ => float_or(n.to_f64().exp2(), || Expr::exp2(a.clone())),
                    },
                    None => Expr::exp2(a),
                }
            }
            Node::Cmp(op, a, b) => {
                let (a, b) = (self.go(a), self.go(b));
                fold_cmp(*op, a, b)
            }
            Node::Cond {
                pred,
                then,
                otherwise,
            } => {
                let pred = self.go(pred);
                if let Some(v) = pred.as_f64() {
                    return if v != 0.0 {
                        self.go(then)
                    } else {
                        self.go(otherwise)
                    };
                }
                let (t, o) = (self.go(then), self.go(otherwise));
                if t == o {
                    t
                } else {
                    Expr::cond(pred, t, o)
                }
            }
            Node::Sum {
                index,
                lo,
                hi,
                body,
            } => {
                let (lo, hi, body) = (self.go(lo), self.go(hi), self.go(body));
                if body.is_zero_const() {
                    return Expr::zero();
                }
                if let (Some(l), Some(h)) = (lo.as_f64(), hi.as_f64()) {
                    if h <= l.ceil() {
                        return Expr::zero();
                    }
                }
                Expr::sum(index.clone(), lo, hi, body)
            }
        }
    }
}

fn float_or(v: f64, fallback: impl FnOnce() -> Expr) -> Expr {
    if v.is_finite() {
        Expr::num(v)
    } else {
        fallback()
    }
}

/// An integer-valued constant as an `IntConst` when it fits exactly.
fn integral_const(v: f64) -> Expr {
    if v.abs() < 9.0e15 {
        Expr::int(v as i64)
    } else {
        Expr::num(v)
    }
}

/// Expressions that always evaluate to an integer.
fn is_integral(e: &Expr) -> bool {
    match e.node() {
        Node::IntConst(_) | Node::Ceil(_) | Node::Floor(_) => true,
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Min(a, b) | Node::Max(a, b) => {
            is_integral(a) && is_integral(b)
        }
        _ => false,
    }
}

fn round(a: Expr, f: fn(f64) -> f64, rebuild: fn(Expr) -> Expr) -> Expr {
    if let Some(v) = a.as_f64() {
        return integral_const(f(v));
    }
    if is_integral(&a) {
        return a;
    }
    rebuild(a)
}

fn fold_pow(base: Expr, exp: Expr) -> Expr {
    if exp.is_zero_const() || base.is_one_const() {
        return Expr::one();
    }
    if exp.is_one_const() {
        return base;
    }
    if let (Some(b), Some(x)) = (base.as_num(), exp.as_num()) {
        if let (Some(bi), Some(xi)) = (b.as_integer(), x.as_integer()) {
            if (0..=62).contains(&xi) {
                if let Some(v) = bi.checked_pow(xi as u32) {
                    return Expr::int(v);
                }
            }
        }
        let v = b.to_f64().powf(x.to_f64());
        return float_or(v, || Expr::pow(base.clone(), exp.clone()));
    }
    Expr::pow(base, exp)
}

fn fold_extremum(a: Expr, b: Expr, is_min: bool) -> Expr {
    let mut items = Vec::new();
    for x in [a, b] {
        flatten_extremum(&x, is_min, &mut items);
    }
    let mut konst: Option<f64> = None;
    let mut konst_expr: Option<Expr> = None;
    let mut rest: Vec<Expr> = Vec::new();
    for it in items {
        if let Some(v) = it.as_f64() {
            let better = match konst {
                None => true,
                Some(k) => {
                    if is_min {
                        v < k
                    } else {
                        v > k
                    }
                }
            };
            if better {
                konst = Some(v);
                konst_expr = Some(it);
            }
        } else if !rest.contains(&it) {
            rest.push(it);
        }
    }
    rest.sort();
    let mut all: Vec<Expr> = konst_expr.into_iter().collect();
    all.extend(rest);
    let mut iter = all.into_iter();
    let first = iter.next().expect("extremum has at least one operand");
    iter.fold(first, |acc, x| {
        if is_min {
            Expr::min(acc, x)
        } else {
            Expr::max(acc, x)
        }
    })
}

fn flatten_extremum(e: &Expr, is_min: bool, out: &mut Vec<Expr>) {
    match (e.node(), is_min) {
        (Node::Min(a, b), true) | (Node::Max(a, b), false) => {
            flatten_extremum(a, is_min, out);
            flatten_extremum(b, is_min, out);
        }
        _ => out.push(e.clone()),
    }
}

fn fold_cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) {
        return Expr::int(op.holds(x, y) as i64);
    }
    if a == b {
        return Expr::int(matches!(op, CmpOp::Le | CmpOp::Eq | CmpOp::Ge) as i64);
    }
    Expr::cmp(op, a, b)
}

/// Splits a canonical product into its numeric coefficient and the rest.
/// Float divisors are left inside the core so that `x / log(2)` keeps its
/// rounding behaviour.
fn split_coeff(e: &Expr) -> (Num, Expr) {
    if let Some(n) = e.as_num() {
        return (n, Expr::one());
    }
    match e.node() {
        Node::Mul(..) => {
            let mut factors = Vec::new();
            flatten_mul(e, &mut factors);
            if let Some(c) = factors.first().and_then(Expr::as_num) {
                let rest = rebuild_mul(factors[1..].to_vec());
                return (c, rest);
            }
            (Num::int(1), e.clone())
        }
        Node::Div(n, d) => match d.as_num() {
            Some(dn @ Num::Rat(_)) => {
                let (c, core) = split_coeff(n);
                match c.div(dn) {
                    Some(q) => (q, core),
                    None => (Num::int(1), e.clone()),
                }
            }
            _ => (Num::int(1), e.clone()),
        },
        _ => (Num::int(1), e.clone()),
    }
}

fn flatten_mul(e: &Expr, out: &mut Vec<Expr>) {
    match e.node() {
        Node::Mul(a, b) => {
            flatten_mul(a, out);
            flatten_mul(b, out);
        }
        _ => out.push(e.clone()),
    }
}

fn rebuild_mul(factors: Vec<Expr>) -> Expr {
    let mut iter = factors.into_iter();
    match iter.next() {
        None => Expr::one(),
        Some(first) => iter.fold(first, |acc, x| acc * x),
    }
}

fn flatten_sum(e: &Expr, sign: Num, konst: &mut Num, out: &mut Vec<(Expr, Num)>) {
    match e.node() {
        Node::Add(a, b) => {
            flatten_sum(a, sign, konst, out);
            flatten_sum(b, sign, konst, out);
        }
        Node::Sub(a, b) => {
            flatten_sum(a, sign, konst, out);
            flatten_sum(b, sign.neg(), konst, out);
        }
        _ => {
            if let Some(n) = e.as_num() {
                *konst = konst.add(sign.mul(n));
                return;
            }
            let (c, core) = split_coeff(e);
            let c = sign.mul(c);
            // Exact coefficients distribute over a nested sum.
            if matches!(c, Num::Rat(_)) && matches!(core.node(), Node::Add(..) | Node::Sub(..)) {
                flatten_sum(&core, c, konst, out);
                return;
            }
            if let Some(slot) = out.iter_mut().find(|(k, _)| *k == core) {
                slot.1 = slot.1.add(c);
            } else {
                out.push((core, c));
            }
        }
    }
}

/// Builds the canonical form of `Σ coefᵢ · termᵢ` from simplified terms.
pub(crate) fn build_sum(terms: &[(Num, Expr)]) -> Expr {
    let mut konst = Num::int(0);
    let mut collected: Vec<(Expr, Num)> = Vec::new();
    for (sign, t) in terms {
        flatten_sum(t, *sign, &mut konst, &mut collected);
    }
    collected.retain(|(_, c)| !c.is_zero());
    collected.sort_by(|a, b| a.0.cmp(&b.0));

    let scaled = |c: Num, core: &Expr| -> Expr {
        if c.is_one() {
            core.clone()
        } else {
            build_product(&[(c.to_expr(), 1), (core.clone(), 1)])
                .unwrap_or_else(|| c.to_expr() * core.clone())
        }
    };

    let mut acc: Option<Expr> = None;
    for (core, c) in collected.iter().filter(|(_, c)| !c.is_negative()) {
        let t = scaled(*c, core);
        acc = Some(match acc {
            None => t,
            Some(a) => a + t,
        });
    }
    if !konst.is_zero() && !konst.is_negative() {
        let k = konst.to_expr();
        acc = Some(match acc {
            None => k,
            Some(a) => a + k,
        });
    }
    for (core, c) in collected.iter().filter(|(_, c)| c.is_negative()) {
        acc = Some(match acc {
            None => scaled(*c, core),
            Some(a) => a - scaled(c.neg(), core),
        });
    }
    if konst.is_negative() {
        acc = Some(match acc {
            None => konst.to_expr(),
            Some(a) => a - konst.neg().to_expr(),
        });
    }
    acc.unwrap_or_else(Expr::zero)
}

fn flatten_product(
    e: &Expr,
    exp: i64,
    num: &mut Num,
    den: &mut Num,
    bases: &mut Vec<(Expr, i64)>,
) {
    match e.node() {
        Node::Mul(a, b) => {
            flatten_product(a, exp, num, den, bases);
            flatten_product(b, exp, num, den, bases);
        }
        Node::Div(a, b) => {
            flatten_product(a, exp, num, den, bases);
            flatten_product(b, -exp, num, den, bases);
        }
        _ => {
            if let Some(n) = e.as_num() {
                if exp > 0 {
                    *num = num.mul(n);
                } else {
                    *den = den.mul(n);
                }
                return;
            }
            let (base, k) = match e.node() {
                Node::Pow(b, x) => match x.as_num().and_then(Num::as_integer) {
                    Some(k) => (b.clone(), k),
                    None => (e.clone(), 1),
                },
                _ => (e.clone(), 1),
            };
            let k = k.saturating_mul(exp);
            if let Some(slot) = bases.iter_mut().find(|(b, _)| *b == base) {
                slot.1 = slot.1.saturating_add(k);
            } else {
                bases.push((base, k));
            }
        }
    }
}

/// Builds the canonical form of `Π baseᵢ^expᵢ` (with `expᵢ = ±1` at the call
/// sites). Returns `None` when the folded denominator is zero.
pub(crate) fn build_product(factors: &[(Expr, i64)]) -> Option<Expr> {
    let mut num = Num::int(1);
    let mut den = Num::int(1);
    let mut bases = Vec::new();
    for (f, k) in factors {
        flatten_product(f, *k, &mut num, &mut den, &mut bases);
    }
    if den.is_zero() {
        return None;
    }
    if num.is_zero() {
        return Some(Expr::zero());
    }
    // Fold the coefficient unless the divisor is a non-rational float.
    if let Num::Rat(_) = den {
        num = num.div(den).expect("nonzero");
        den = Num::int(1);
    } else if den.is_negative() {
        num = num.neg();
        den = den.neg();
    }
    bases.retain(|(_, k)| *k != 0);
    if bases.is_empty() && !den.is_one() {
        // The same single division the evaluator would perform.
        return Some(Expr::num(num.to_f64() / den.to_f64()));
    }
    bases.sort_by(|a, b| a.0.cmp(&b.0));

    let power = |b: &Expr, k: i64| -> Expr {
        if k == 1 {
            b.clone()
        } else {
            Expr::pow(b.clone(), Expr::int(k))
        }
    };
    // A rational coefficient p/q contributes p upstairs and q downstairs.
    let (num_c, den_c) = match num {
        Num::Rat(r) if !r.is_integer() => (Num::int(*r.numer()), Num::int(*r.denom()).mul(den)),
        other => (other, den),
    };

    let mut upstairs: Vec<Expr> = Vec::new();
    if !num_c.is_one() {
        upstairs.push(num_c.to_expr());
    }
    upstairs.extend(bases.iter().filter(|(_, k)| *k > 0).map(|(b, k)| power(b, *k)));
    let mut downstairs: Vec<Expr> = Vec::new();
    if !den_c.is_one() {
        downstairs.push(den_c.to_expr());
    }
    downstairs.extend(bases.iter().filter(|(_, k)| *k < 0).map(|(b, k)| power(b, -k)));

    let top = rebuild_mul(upstairs);
    if downstairs.is_empty() {
        Some(top)
    } else {
        Some(Expr::div_nonzero(top, rebuild_mul(downstairs)))
    }
}
