//! Interval over-approximation of expression ranges, used to prove the sign
//! facts that the summation rules depend on.

use std::collections::HashMap;

use super::{Expr, Node};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Interval {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Interval::FULL;
        }
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Interval {
        Interval::new(v, v)
    }

    pub fn nonneg() -> Interval {
        Interval::new(0.0, f64::INFINITY)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn union(self, o: Interval) -> Interval {
        Interval::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }

    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    fn mul(self, o: Interval) -> Interval {
        // 0 · ∞ is taken as 0: a zero factor is exact.
        let m = |a: f64, b: f64| if a == 0.0 || b == 0.0 { 0.0 } else { a * b };
        let c = [
            m(self.lo, o.lo),
            m(self.lo, o.hi),
            m(self.hi, o.lo),
            m(self.hi, o.hi),
        ];
        Interval::new(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    fn recip(self) -> Interval {
        if self.contains(0.0) {
            return Interval::FULL;
        }
        Interval::new(1.0 / self.hi, 1.0 / self.lo)
    }

    fn monotone(self, f: impl Fn(f64) -> f64) -> Interval {
        Interval::new(f(self.lo), f(self.hi))
    }
}

/// Known ranges of free variables. Unknown variables are unbounded.
#[derive(Debug, Clone, Default)]
pub struct Bounds {
    vars: HashMap<String, Interval>,
}

impl Bounds {
    pub fn new() -> Bounds {
        Bounds::default()
    }

    pub fn set(&mut self, name: impl Into<String>, iv: Interval) {
        self.vars.insert(name.into(), iv);
    }

    pub fn with(mut self, name: impl Into<String>, iv: Interval) -> Bounds {
        self.set(name, iv);
        self
    }

    pub fn get(&self, name: &str) -> Option<Interval> {
        self.vars.get(name).copied()
    }

    pub fn remove(&mut self, name: &str) -> Option<Interval> {
        self.vars.remove(name)
    }

    pub fn range(&self, e: &Expr) -> Interval {
        match e.node() {
            Node::Const(v) => Interval::point(*v),
            Node::IntConst(v) => Interval::point(*v as f64),
            Node::Var(v) => self.get(v).unwrap_or(Interval::FULL),
            Node::Add(a, b) => self.range(a).add(self.range(b)),
            Node::Sub(a, b) => self.range(a).add(self.range(b).neg()),
            Node::Mul(a, b) => self.range(a).mul(self.range(b)),
            Node::Div(a, b) => self.range(a).mul(self.range(b).recip()),
            Node::Pow(a, b) => pow_range(self.range(a), self.range(b)),
            Node::Min(a, b) => {
                let (x, y) = (self.range(a), self.range(b));
                Interval::new(x.lo.min(y.lo), x.hi.min(y.hi))
            }
            Node::Max(a, b) => {
                let (x, y) = (self.range(a), self.range(b));
                Interval::new(x.lo.max(y.lo), x.hi.max(y.hi))
            }
            Node::Ceil(a) => self.range(a).monotone(f64::ceil),
            Node::Floor(a) => self.range(a).monotone(f64::floor),
            Node::Log(a) => {
                let x = self.range(a);
                if x.lo > 0.0 {
                    x.monotone(f64::ln)
                } else {
                    Interval::new(f64::NEG_INFINITY, if x.hi > 0.0 { x.hi.ln() } else { f64::INFINITY })
                }
            }
            Node::Exp2(a) => self.range(a).monotone(f64::exp2),
            Node::Sum {
                index,
                lo,
                hi,
                body,
            } => {
                let (l, h) = (self.range(lo), self.range(hi));
                let count = Interval::new(0.0, (h.hi - l.lo.ceil()).max(0.0));
                let mut inner = self.clone();
                inner.set(index.clone(), Interval::new(l.lo.ceil(), h.hi - 1.0));
                let b = inner.range(body).union(Interval::point(0.0));
                count.mul(b)
            }
            Node::Cond {
                then, otherwise, ..
            } => self.range(then).union(self.range(otherwise)),
            Node::Cmp(..) => Interval::new(0.0, 1.0),
        }
    }

    pub fn is_nonneg(&self, e: &Expr) -> bool {
        self.range(e).lo >= 0.0
    }

    pub fn is_positive(&self, e: &Expr) -> bool {
        self.range(e).lo > 0.0
    }
}

fn pow_range(base: Interval, exp: Interval) -> Interval {
    if exp.lo == exp.hi && exp.lo.fract() == 0.0 && exp.lo >= 0.0 {
        let k = exp.lo as i32;
        if base.lo >= 0.0 {
            return base.monotone(|x| x.powi(k));
        }
        if k % 2 == 0 {
            let m = base.lo.abs().max(base.hi.abs());
            let lo = if base.contains(0.0) { 0.0 } else { base.lo.abs().min(base.hi.abs()) };
            return Interval::new(lo.powi(k), m.powi(k));
        }
        return base.monotone(|x| x.powi(k));
    }
    if base.lo > 0.0 {
        let c = [
            base.lo.powf(exp.lo),
            base.lo.powf(exp.hi),
            base.hi.powf(exp.lo),
            base.hi.powf(exp.hi),
        ];
        let c: Vec<f64> = c.into_iter().map(|v| if v.is_nan() { f64::INFINITY } else { v }).collect();
        return Interval::new(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
    }
    if base.lo >= 0.0 {
        return Interval::nonneg();
    }
    Interval::FULL
}
