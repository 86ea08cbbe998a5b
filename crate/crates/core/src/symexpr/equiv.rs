use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, Env, EvalError, Expr};

/// Sampling domain of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarDomain {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub integer: bool,
    /// Sample uniformly in `log(x)`; requires `lo > 0`.
    #[serde(default)]
    pub log_scale: bool,
}

impl VarDomain {
    pub fn real(lo: f64, hi: f64) -> VarDomain {
        VarDomain {
            lo,
            hi,
            integer: false,
            log_scale: false,
        }
    }

    pub fn int(lo: i64, hi: i64) -> VarDomain {
        VarDomain {
            lo: lo as f64,
            hi: hi as f64,
            integer: true,
            log_scale: false,
        }
    }

    pub fn log(lo: f64, hi: f64) -> VarDomain {
        VarDomain {
            lo,
            hi,
            integer: false,
            log_scale: true,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let x = if self.log_scale && self.lo > 0.0 {
            rng.random_range(self.lo.ln()..=self.hi.ln()).exp()
        } else if self.lo < self.hi {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        };
        if self.integer {
            x.round().clamp(self.lo.ceil(), self.hi.floor())
        } else {
            x.clamp(self.lo, self.hi)
        }
    }
}

/// Compares two expressions at `trials` seeded random points. Passes when
/// `|e1 − e2| ≤ rel_tol · max(1, |e1|)` everywhere.
pub fn equivalence_check(
    e1: &Expr,
    e2: &Expr,
    domains: &BTreeMap<String, VarDomain>,
    trials: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<bool, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let env: Env = domains
            .iter()
            .map(|(k, d)| (k.clone(), d.sample(&mut rng)))
            .collect();
        let a = evaluate(e1, &env)?;
        let b = evaluate(e2, &env)?;
        if (a - b).abs() > rel_tol * a.abs().max(1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::faulhaber;

    #[test]
    fn triangular_identity() {
        let n = Expr::var("N");
        let closed = faulhaber(1, &n).unwrap();
        let sum = Expr::sum("i", Expr::zero(), n.clone(), Expr::var("i"));
        let dom = BTreeMap::from([("N".to_string(), VarDomain::int(1, 100))]);
        assert_eq!(equivalence_check(&closed, &sum, &dom, 50, 1e-9, 1), Ok(true));
    }

    #[test]
    fn off_by_one_detected() {
        let x = Expr::var("x");
        let dom = BTreeMap::from([("x".to_string(), VarDomain::real(-5.0, 5.0))]);
        assert_eq!(
            equivalence_check(&x, &(x.clone() + Expr::one()), &dom, 10, 1e-9, 1),
            Ok(false)
        );
    }

    #[test]
    fn samples_respect_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = VarDomain {
            lo: 1e-6,
            hi: 0.1,
            integer: false,
            log_scale: true,
        };
        for _ in 0..100 {
            let v = d.sample(&mut rng);
            assert!((1e-6..=0.1).contains(&v));
        }
        let i = VarDomain::int(2, 4);
        for _ in 0..100 {
            let v = i.sample(&mut rng);
            assert!([2.0, 3.0, 4.0].contains(&v));
        }
    }
}
