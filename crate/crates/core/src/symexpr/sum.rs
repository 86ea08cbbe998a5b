//! Closed forms for finite sums.

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::simplify::build_sum;
use super::{simplify, to_poly_in, Bounds, Expr, Interval, Node, Num};

/// Whether a derived expression is exact or only an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum SummaryKind {
    #[default]
    Exact,
    UpperBound,
}

impl SummaryKind {
    /// UpperBound absorbs Exact.
    pub fn join(self, other: SummaryKind) -> SummaryKind {
        if self == SummaryKind::UpperBound || other == SummaryKind::UpperBound {
            SummaryKind::UpperBound
        } else {
            SummaryKind::Exact
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SumError {
    #[error("power sums are supported up to exponent 6, got {0}")]
    UnsupportedExponent(u32),
}

const MAX_POWER: u32 = 6;

fn binomial(n: i64, k: i64) -> i64 {
    (0..k).fold(1, |acc, j| acc * (n - j) / (j + 1))
}

/// Bernoulli numbers with the B₁ = −1/2 convention.
fn bernoulli(k: u32) -> Ratio<i64> {
    const TABLE: [(i64, i64); 7] = [(1, 1), (-1, 2), (1, 6), (0, 1), (-1, 30), (0, 1), (1, 42)];
    let (n, d) = TABLE[k as usize];
    Ratio::new(n, d)
}

/// Closed form of `Σ_{i=0}^{N-1} iᵖ` as an integer polynomial in `N` over an
/// integer denominator, so that evaluation at integer `N` stays exact until
/// the numerator leaves the integer range of `f64`.
pub fn faulhaber(p: u32, n: &Expr) -> Result<Expr, SumError> {
    if p > MAX_POWER {
        return Err(SumError::UnsupportedExponent(p));
    }
    let p1 = p as i64 + 1;
    // Coefficient of N^(p+1-k) is C(p+1, k)·B_k / (p+1).
    let coeffs: Vec<(i64, Ratio<i64>)> = (0..=p)
        .map(|k| {
            let c = Ratio::from_integer(binomial(p1, k as i64)) * bernoulli(k) / p1;
            (p1 - k as i64, c)
        })
        .filter(|(_, c)| *c.numer() != 0)
        .collect();
    let den = coeffs.iter().fold(1i64, |acc, (_, c)| acc.lcm(c.denom()));
    let mut poly: Option<Expr> = None;
    for (deg, c) in coeffs {
        let k = (c * den).to_integer();
        let pw = if deg == 1 {
            n.clone()
        } else {
            Expr::pow(n.clone(), Expr::int(deg))
        };
        let term = if k.abs() == 1 { pw } else { Expr::int(k.abs()) * pw };
        poly = Some(match poly {
            None if k < 0 => Expr::int(-1) * term,
            None => term,
            Some(acc) if k < 0 => acc - term,
            Some(acc) => acc + term,
        });
    }
    let poly = poly.unwrap_or_else(Expr::zero);
    Ok(if den == 1 {
        poly
    } else {
        Expr::div_nonzero(poly, Expr::int(den))
    })
}

/// Eliminates a `Sum` node, returning the result and whether it is exact.
/// Anything that is not a `Sum` is returned unchanged.
pub fn sum_elim(s: &Expr) -> (Expr, SummaryKind) {
    sum_elim_with(s, &Bounds::new())
}

/// Like [`sum_elim`], with known variable ranges available for the sign
/// conditions of the bounding rules.
pub fn sum_elim_with(s: &Expr, bounds: &Bounds) -> (Expr, SummaryKind) {
    match s.node() {
        Node::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            let (lo, hi) = (simplify(lo), simplify(hi));
            if let (Some(l), Some(h)) = (lo.as_f64(), hi.as_f64()) {
                if h <= l.ceil() {
                    return (Expr::zero(), SummaryKind::Exact);
                }
            }
            let mut inner = bounds.clone();
            let (lr, hr) = (bounds.range(&lo), bounds.range(&hi));
            inner.set(index.clone(), Interval::new(lr.lo.ceil(), hr.hi - 1.0));
            let ctx = Ctx {
                index,
                lo: &lo,
                hi: &hi,
                bounds: &inner,
            };
            let (e, k) = ctx.elim(&simplify(body));
            (simplify(&e), k)
        }
        _ => (s.clone(), SummaryKind::Exact),
    }
}

struct Ctx<'a> {
    index: &'a str,
    lo: &'a Expr,
    hi: &'a Expr,
    bounds: &'a Bounds,
}

impl Ctx<'_> {
    fn residual(&self, body: &Expr) -> Expr {
        Expr::sum(self.index, self.lo.clone(), self.hi.clone(), body.clone())
    }

    fn nested(&self, body: Expr) -> (Expr, SummaryKind) {
        sum_elim_with(&self.residual(&body), self.bounds)
    }

    fn elim(&self, body: &Expr) -> (Expr, SummaryKind) {
        if let Some(e) = self.closed_form(body) {
            return (e, SummaryKind::Exact);
        }
        let mut terms = Vec::new();
        signed_terms(body, Num::int(1), &mut terms);
        if terms.len() > 1 {
            let mut kind = SummaryKind::Exact;
            let mut parts = Vec::new();
            for (sign, t) in terms {
                let (mut e, mut k) = self.elim_term(&t);
                if sign.is_negative() && k == SummaryKind::UpperBound {
                    // Subtracting an upper bound would under-approximate.
                    e = self.residual(&t);
                    k = SummaryKind::Exact;
                }
                kind = kind.join(k);
                parts.push((sign, simplify(&e)));
            }
            return (build_sum(&parts), kind);
        }
        self.elim_term(body)
    }

    fn closed_form(&self, body: &Expr) -> Option<Expr> {
        if !body.mentions(self.index) {
            return Some(body.clone() * (self.hi.clone() - self.lo.clone()));
        }
        let coeffs = to_poly_in(body, self.index)?;
        if coeffs.len() > MAX_POWER as usize + 1 {
            return None;
        }
        let mut total: Option<Expr> = None;
        for (p, c) in coeffs.iter().enumerate() {
            if c.is_zero_const() {
                continue;
            }
            let upper = faulhaber(p as u32, self.hi).ok()?;
            let range = if self.lo.is_zero_const() {
                upper
            } else {
                upper - faulhaber(p as u32, self.lo).ok()?
            };
            let term = c.clone() * range;
            total = Some(match total {
                None => term,
                Some(t) => t + term,
            });
        }
        Some(total.unwrap_or_else(Expr::zero))
    }

    fn elim_term(&self, t: &Expr) -> (Expr, SummaryKind) {
        if let Some(e) = self.closed_form(t) {
            return (e, SummaryKind::Exact);
        }
        if let Some((coef, g, h, is_min)) = split_extremum(t) {
            let cg = simplify(&(coef.clone() * g));
            let ch = simplify(&(coef.clone() * h));
            if is_min && self.bounds.is_nonneg(&coef) {
                let (a, _) = self.nested(cg);
                let (b, _) = self.nested(ch);
                return (Expr::min(a, b), SummaryKind::UpperBound);
            }
            if !is_min && self.bounds.is_nonneg(&cg) && self.bounds.is_nonneg(&ch) {
                let (a, _) = self.nested(cg);
                let (b, _) = self.nested(ch);
                return (a + b, SummaryKind::UpperBound);
            }
        }
        if let Some(e) = self.geometric(t) {
            return (e, SummaryKind::Exact);
        }
        (self.residual(t), SummaryKind::Exact)
    }

    /// `Σ c·b^(α·i + β)` for a constant base `b`.
    fn geometric(&self, t: &Expr) -> Option<Expr> {
        let (coef, factor) = split_factor(t, &|f| {
            matches!(f.node(), Node::Exp2(_))
                || matches!(f.node(), Node::Pow(b, _) if b.as_f64().is_some_and(|v| v > 0.0))
        })?;
        if coef.mentions(self.index) {
            return None;
        }
        let (base, exponent) = match factor.node() {
            Node::Exp2(x) => (Expr::int(2), x.clone()),
            Node::Pow(b, x) => (b.clone(), x.clone()),
            _ => return None,
        };
        let lin = to_poly_in(&exponent, self.index)?;
        if lin.len() != 2 {
            return None;
        }
        let (beta, alpha) = (lin[0].clone(), lin[1].clone());
        let a = alpha.as_f64()?;
        let b = base.as_f64()?;
        if a == 0.0 || b.powf(a) == 1.0 {
            return None;
        }
        let power = |x: Expr| -> Expr {
            if matches!(factor.node(), Node::Exp2(_)) {
                Expr::exp2(x)
            } else {
                Expr::pow(base.clone(), x)
            }
        };
        let top = power(alpha.clone() * self.hi.clone()) - power(alpha.clone() * self.lo.clone());
        let ratio = simplify(&(power(alpha.clone()) - Expr::one()));
        if ratio.is_zero_const() {
            return None;
        }
        Some(coef * power(beta) * Expr::div_nonzero(top, ratio))
    }
}

fn signed_terms(e: &Expr, sign: Num, out: &mut Vec<(Num, Expr)>) {
    match e.node() {
        Node::Add(a, b) => {
            signed_terms(a, sign, out);
            signed_terms(b, sign, out);
        }
        Node::Sub(a, b) => {
            signed_terms(a, sign, out);
            signed_terms(b, sign.neg(), out);
        }
        _ => out.push((sign, e.clone())),
    }
}

/// Splits `t = coef · f` where `f` is the first numerator factor satisfying
/// `pick`.
fn split_factor(t: &Expr, pick: &dyn Fn(&Expr) -> bool) -> Option<(Expr, Expr)> {
    if pick(t) {
        return Some((Expr::one(), t.clone()));
    }
    match t.node() {
        Node::Mul(a, b) => {
            if let Some((c, f)) = split_factor(a, pick) {
                return Some((simplify(&(c * b.clone())), f));
            }
            let (c, f) = split_factor(b, pick)?;
            Some((simplify(&(a.clone() * c)), f))
        }
        Node::Div(a, b) => {
            let (c, f) = split_factor(a, pick)?;
            Some((simplify(&Expr::div_nonzero(c, b.clone())), f))
        }
        _ => None,
    }
}

fn split_extremum(t: &Expr) -> Option<(Expr, Expr, Expr, bool)> {
    let (coef, f) = split_factor(t, &|f| matches!(f.node(), Node::Min(..) | Node::Max(..)))?;
    match f.node() {
        Node::Min(g, h) => Some((coef, g.clone(), h.clone(), true)),
        Node::Max(g, h) => Some((coef, g.clone(), h.clone(), false)),
        _ => None,
    }
}
