use num_integer::Integer;
use num_rational::Ratio;

use super::Expr;

/// Numeric constant used while folding: exact rationals where possible,
/// falling back to floating point on overflow or when a float is involved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Num {
    Rat(Ratio<i64>),
    Float(f64),
}

impl Num {
    pub fn int(v: i64) -> Num {
        Num::Rat(Ratio::from_integer(v))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Num::Rat(r) => {
                if r.is_integer() {
                    *r.numer() as f64
                } else {
                    *r.numer() as f64 / *r.denom() as f64
                }
            }
            Num::Float(v) => v,
        }
    }

    pub fn is_zero(self) -> bool {
        self.to_f64() == 0.0
    }

    pub fn is_one(self) -> bool {
        match self {
            Num::Rat(r) => r == Ratio::from_integer(1),
            Num::Float(v) => v == 1.0,
        }
    }

    pub fn is_negative(self) -> bool {
        self.to_f64() < 0.0
    }

    pub fn as_integer(self) -> Option<i64> {
        match self {
            Num::Rat(r) if r.is_integer() => Some(*r.numer()),
            _ => None,
        }
    }

    pub fn add(self, other: Num) -> Num {
        match (self, other) {
            (Num::Rat(a), Num::Rat(b)) => checked(a, b, |x, y| {
                let l = x.denom().lcm(y.denom());
                let xn = x.numer().checked_mul(l / x.denom())?;
                let yn = y.numer().checked_mul(l / y.denom())?;
                Some(Ratio::new(xn.checked_add(yn)?, l))
            })
            .unwrap_or(Num::Float(self.to_f64() + other.to_f64())),
            _ => Num::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn neg(self) -> Num {
        match self {
            Num::Rat(r) => match r.numer().checked_neg() {
                Some(n) => Num::Rat(Ratio::new(n, *r.denom())),
                None => Num::Float(-self.to_f64()),
            },
            Num::Float(v) => Num::Float(-v),
        }
    }

    pub fn sub(self, other: Num) -> Num {
        self.add(other.neg())
    }

    pub fn mul(self, other: Num) -> Num {
        match (self, other) {
            (Num::Rat(a), Num::Rat(b)) => checked(a, b, |x, y| {
                let g1 = x.numer().gcd(y.denom());
                let g2 = y.numer().gcd(x.denom());
                let (g1, g2) = (g1.max(1), g2.max(1));
                let n = (x.numer() / g1).checked_mul(y.numer() / g2)?;
                let d = (x.denom() / g2).checked_mul(y.denom() / g1)?;
                Some(Ratio::new(n, d))
            })
            .unwrap_or(Num::Float(self.to_f64() * other.to_f64())),
            _ => Num::Float(self.to_f64() * other.to_f64()),
        }
    }

    /// Exact quotient when both are rational; `None` for a zero divisor.
    pub fn div(self, other: Num) -> Option<Num> {
        if other.is_zero() {
            return None;
        }
        Some(match (self, other) {
            (Num::Rat(a), Num::Rat(b)) if *b.numer() != i64::MIN => {
                Num::Rat(a).mul(Num::Rat(Ratio::new(*b.denom(), *b.numer())))
            }
            _ => Num::Float(self.to_f64() / other.to_f64()),
        })
    }

    pub fn to_expr(self) -> Expr {
        match self {
            Num::Rat(r) if r.is_integer() => Expr::int(*r.numer()),
            Num::Rat(r) => Expr::div_nonzero(Expr::int(*r.numer()), Expr::int(*r.denom())),
            Num::Float(v) => Expr::num(v),
        }
    }
}

fn checked(
    a: Ratio<i64>,
    b: Ratio<i64>,
    f: impl FnOnce(Ratio<i64>, Ratio<i64>) -> Option<Ratio<i64>>,
) -> Option<Num> {
    f(a, b).map(Num::Rat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_arithmetic_stays_exact() {
        let half = Num::int(1).div(Num::int(2)).unwrap();
        assert_eq!(half.add(half), Num::int(1));
        assert_eq!(half.mul(Num::int(4)), Num::int(2));
        assert_eq!(Num::int(3).div(Num::int(-6)).unwrap().to_f64(), -0.5);
        assert!(Num::int(1).div(Num::int(0)).is_none());
    }

    #[test]
    fn overflow_falls_back_to_float() {
        let big = Num::int(i64::MAX);
        match big.add(Num::int(1)) {
            Num::Float(v) => assert!(v > 9.2e18),
            other => panic!("expected float, got {other:?}"),
        }
    }
}
