//! Polynomial views of expressions: coefficients in a single variable, and a
//! multivariate normal form used to tidy final summaries.

use std::collections::BTreeMap;

use super::simplify::{build_product, build_sum};
use super::{simplify, Expr, Node, Num};

const MAX_DEGREE: usize = 12;

/// Coefficients `c₀, c₁, …` such that `expr = Σ cₖ·varᵏ`, with every `cₖ`
/// free of `var`. `None` if `expr` is not polynomial in `var`.
pub fn to_poly_in(expr: &Expr, var: &str) -> Option<Vec<Expr>> {
    let raw = coeffs(expr, var)?;
    let mut out: Vec<Expr> = raw.iter().map(simplify).collect();
    while out.len() > 1 && out.last().is_some_and(Expr::is_zero_const) {
        out.pop();
    }
    Some(out)
}

fn coeffs(e: &Expr, var: &str) -> Option<Vec<Expr>> {
    if !e.mentions(var) {
        return Some(vec![e.clone()]);
    }
    match e.node() {
        Node::Var(_) => Some(vec![Expr::zero(), Expr::one()]),
        Node::Add(a, b) => Some(zip_with(coeffs(a, var)?, coeffs(b, var)?, |x, y| x + y)),
        Node::Sub(a, b) => Some(zip_with(coeffs(a, var)?, coeffs(b, var)?, |x, y| x - y)),
        Node::Mul(a, b) => convolve(&coeffs(a, var)?, &coeffs(b, var)?),
        Node::Div(a, b) if !b.mentions(var) => Some(
            coeffs(a, var)?
                .into_iter()
                .map(|c| Expr::div_nonzero(c, b.clone()))
                .collect(),
        ),
        Node::Pow(a, k) => {
            let k = k.as_num()?.as_integer()?;
            if !(0..=MAX_DEGREE as i64).contains(&k) {
                return None;
            }
            let base = coeffs(a, var)?;
            let mut acc = vec![Expr::one()];
            for _ in 0..k {
                acc = convolve(&acc, &base)?;
            }
            Some(acc)
        }
        _ => None,
    }
}

fn zip_with(a: Vec<Expr>, b: Vec<Expr>, f: impl Fn(Expr, Expr) -> Expr) -> Vec<Expr> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| {
            let x = a.get(k).cloned().unwrap_or_else(Expr::zero);
            let y = b.get(k).cloned().unwrap_or_else(Expr::zero);
            f(x, y)
        })
        .collect()
}

fn convolve(a: &[Expr], b: &[Expr]) -> Option<Vec<Expr>> {
    if a.len() + b.len() - 1 > MAX_DEGREE + 1 {
        return None;
    }
    let mut out = vec![Expr::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    Some(out)
}

type Mono = Vec<(Expr, i64)>;

const MAX_TERMS: usize = 64;

#[derive(Clone)]
struct Poly(BTreeMap<Mono, Num>);

impl Poly {
    fn constant(n: Num) -> Poly {
        let mut m = BTreeMap::new();
        if !n.is_zero() {
            m.insert(Vec::new(), n);
        }
        Poly(m)
    }

    fn atom(e: Expr, k: i64) -> Poly {
        let mut m = BTreeMap::new();
        m.insert(vec![(e, k)], Num::int(1));
        Poly(m)
    }

    fn add(mut self, other: &Poly, sign: Num) -> Option<Poly> {
        for (mono, c) in &other.0 {
            let entry = self.0.entry(mono.clone()).or_insert(Num::int(0));
            *entry = entry.add(sign.mul(*c));
            if entry.is_zero() {
                self.0.remove(mono);
            }
        }
        (self.0.len() <= MAX_TERMS).then_some(self)
    }

    fn mul(&self, other: &Poly) -> Option<Poly> {
        if self.0.len() * other.0.len() > MAX_TERMS * 4 {
            return None;
        }
        let mut out = Poly(BTreeMap::new());
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                let mut mono = m1.clone();
                for (atom, k) in m2 {
                    if let Some(slot) = mono.iter_mut().find(|(a, _)| a == atom) {
                        slot.1 += k;
                    } else {
                        mono.push((atom.clone(), *k));
                    }
                }
                mono.retain(|(_, k)| *k != 0);
                mono.sort_by(|a, b| a.0.cmp(&b.0));
                let single = Poly(BTreeMap::from([(mono, c1.mul(*c2))]));
                out = out.add(&single, Num::int(1))?;
            }
        }
        Some(out)
    }

    fn to_expr(&self) -> Expr {
        let terms: Vec<(Num, Expr)> = self
            .0
            .iter()
            .map(|(mono, c)| {
                let mut factors: Vec<(Expr, i64)> = vec![(c.to_expr(), 1)];
                for (atom, k) in mono {
                    let f = if k.abs() == 1 {
                        atom.clone()
                    } else {
                        Expr::pow(atom.clone(), Expr::int(k.abs()))
                    };
                    factors.push((f, k.signum()));
                }
                let t = build_product(&factors).expect("monomial denominators are nonzero");
                (Num::int(1), t)
            })
            .collect();
        build_sum(&terms)
    }
}

fn poly_of(e: &Expr) -> Option<Poly> {
    if let Some(n) = e.as_num() {
        return Some(Poly::constant(n));
    }
    match e.node() {
        Node::Add(a, b) => poly_of(a)?.add(&poly_of(b)?, Num::int(1)),
        Node::Sub(a, b) => poly_of(a)?.add(&poly_of(b)?, Num::int(-1)),
        Node::Mul(a, b) => poly_of(a)?.mul(&poly_of(b)?),
        Node::Div(a, b) => {
            let top = poly_of(a)?;
            match b.as_num() {
                Some(d @ Num::Rat(_)) if !d.is_zero() => top.mul(&Poly::constant(Num::int(1).div(d)?)),
                _ => {
                    let inv = match poly_of(b) {
                        Some(p) if p.0.len() == 1 => {
                            let (mono, c) = p.0.iter().next().expect("one term");
                            if let Num::Rat(_) = c {
                                let inv_mono: Mono = mono.iter().map(|(a, k)| (a.clone(), -k)).collect();
                                Poly(BTreeMap::from([(inv_mono, Num::int(1).div(*c)?)]))
                            } else {
                                Poly::atom(tidy(b), -1)
                            }
                        }
                        _ => Poly::atom(tidy(b), -1),
                    };
                    top.mul(&inv)
                }
            }
        }
        Node::Pow(a, k) => match k.as_num().and_then(Num::as_integer) {
            Some(k) if (1..=8).contains(&k) => {
                let base = poly_of(a)?;
                let mut acc = Poly::constant(Num::int(1));
                for _ in 0..k {
                    acc = acc.mul(&base)?;
                }
                Some(acc)
            }
            _ => Some(Poly::atom(tidy(e), 1)),
        },
        _ => Some(Poly::atom(tidy(e), 1)),
    }
}

/// Atoms keep their internal arithmetic untouched (so rounding inside
/// `ceil`/`log` is preserved) except for extrema and conditionals, whose
/// operands are themselves expanded.
fn tidy(e: &Expr) -> Expr {
    match e.node() {
        Node::Min(..) | Node::Max(..) | Node::Cond { .. } => simplify(&e.map_children(expand_simplified)),
        _ => e.clone(),
    }
}

fn expand_simplified(e: &Expr) -> Expr {
    match poly_of(e) {
        Some(p) => p.to_expr(),
        None => tidy(e),
    }
}

/// Multiplies out products of sums and collects monomials. Falls back to the
/// simplified form when the expansion would be large.
pub fn expand(expr: &Expr) -> Expr {
    expand_simplified(&simplify(expr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{evaluate, Env};

    #[test]
    fn coefficients_of_quadratic() {
        let i = Expr::var("i");
        let n = Expr::var("n");
        let e = (n.clone() - i.clone()) * (i.clone() + Expr::int(1));
        let c = to_poly_in(&e, "i").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[0], n.clone());
        assert_eq!(c[1], simplify(&(n - Expr::int(1))));
        assert_eq!(c[2], Expr::int(-1));
    }

    #[test]
    fn non_polynomial_rejected() {
        let e = Expr::log(Expr::var("i"));
        assert!(to_poly_in(&e, "i").is_none());
        assert!(to_poly_in(&Expr::div_nonzero(Expr::one(), Expr::var("i")), "i").is_none());
        assert_eq!(to_poly_in(&Expr::log(Expr::var("n")), "i").unwrap().len(), 1);
    }

    #[test]
    fn expand_collects() {
        let n = Expr::var("n");
        let e = Expr::div_nonzero(n.clone() * (n.clone() - Expr::one()), Expr::int(2))
            + Expr::div_nonzero(n.clone(), Expr::int(2));
        let x = expand(&e);
        assert_eq!(x, Expr::div_nonzero(Expr::pow(n.clone(), Expr::int(2)), Expr::int(2)));
        let env = Env::new().with("n", 7.0);
        assert_eq!(evaluate(&x, &env), evaluate(&e, &env));
    }
}
