//! Estimator-level rewrites applied before abstract interpretation.

use thiserror::Error;

use crate::extract::{hoist_conditional, EStmt, EstimatorProgram};
use crate::symexpr::{simplify, sum_elim, to_poly_in, Expr, SummaryKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiftError {
    #[error("loop body is not a single liftable increment")]
    NotApplicable,
}

const MAX_LIFT_DEGREE: usize = 6;

/// Fuses runs of adjacent increments of the same counter. Calls, lets and
/// compound statements end a run.
pub fn merge_increments(ep: &EstimatorProgram) -> EstimatorProgram {
    let mut out = ep.clone();
    for sub in &mut out.subroutines {
        sub.body = merge_block(&sub.body, true);
    }
    out
}

fn merge_block(body: &[EStmt], recurse: bool) -> Vec<EStmt> {
    let mut out: Vec<EStmt> = Vec::with_capacity(body.len());
    for s in body {
        let s = if recurse { map_blocks(s, &|b| merge_block(b, true)) } else { s.clone() };
        if let (
            Some(EStmt::Increment {
                counter: prev,
                amount: acc,
            }),
            EStmt::Increment { counter, amount },
        ) = (out.last_mut(), &s)
        {
            if prev == counter {
                *acc = simplify(&(acc.clone() + amount.clone()));
                continue;
            }
        }
        out.push(s);
    }
    out
}

fn map_blocks(s: &EStmt, f: &dyn Fn(&[EStmt]) -> Vec<EStmt>) -> EStmt {
    match s {
        EStmt::For {
            index,
            lo,
            hi,
            body,
        } => EStmt::For {
            index: index.clone(),
            lo: lo.clone(),
            hi: hi.clone(),
            body: f(body),
        },
        EStmt::If {
            cond,
            then_body,
            else_body,
        } => EStmt::If {
            cond: cond.clone(),
            then_body: f(then_body),
            else_body: f(else_body),
        },
        EStmt::MeasureBranch {
            then_body,
            else_body,
        } => EStmt::MeasureBranch {
            then_body: f(then_body),
            else_body: f(else_body),
        },
        other => other.clone(),
    }
}

/// `for i in lo..hi { inc C a(i) }` becomes `inc C Σ a(i)` when `a` is
/// polynomial in `i`. Assumes `hi >= lo`.
pub fn lift_loop_increment(s: &EStmt) -> Result<EStmt, LiftError> {
    let EStmt::For {
        index,
        lo,
        hi,
        body,
    } = s
    else {
        return Err(LiftError::NotApplicable);
    };
    let [EStmt::Increment { counter, amount }] = body.as_slice() else {
        return Err(LiftError::NotApplicable);
    };
    match to_poly_in(amount, index) {
        Some(c) if c.len() <= MAX_LIFT_DEGREE + 1 => {}
        _ => return Err(LiftError::NotApplicable),
    }
    let (total, kind) = sum_elim(&Expr::sum(index.clone(), lo.clone(), hi.clone(), amount.clone()));
    if kind != SummaryKind::Exact || total.has_residual_control_flow() {
        return Err(LiftError::NotApplicable);
    }
    Ok(EStmt::Increment {
        counter: *counter,
        amount: total,
    })
}

/// Hoists guards, lifts loops bottom-up and merges increments, in that order
/// at every nesting level.
pub fn prepare(ep: &EstimatorProgram) -> EstimatorProgram {
    let mut out = ep.clone();
    for sub in &mut out.subroutines {
        sub.body = prepare_block(&sub.body);
    }
    out
}

fn prepare_block(body: &[EStmt]) -> Vec<EStmt> {
    let stmts: Vec<EStmt> = body
        .iter()
        .map(|s| {
            let s = hoist_conditional(s).unwrap_or_else(|_| s.clone());
            let s = map_blocks(&s, &prepare_block);
            lift_loop_increment(&s).unwrap_or(s)
        })
        .collect();
    merge_block(&stmts, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{make_cost_estimator, Counter, Granularity};
    use crate::ir::{parse, parse_cexpr, GateSet};

    fn inc(amount: &str) -> EStmt {
        EStmt::Increment {
            counter: Counter::T,
            amount: parse_cexpr(amount).unwrap(),
        }
    }

    #[test]
    fn merge_runs() {
        let merged = merge_block(&[inc("1"), inc("1"), inc("x")], true);
        assert_eq!(merged, vec![inc("x + 2")]);
        let call = EStmt::Call {
            callee: "f".into(),
            args: vec![],
            label: "f@1".into(),
        };
        let body = vec![inc("1"), call, inc("1")];
        assert_eq!(merge_block(&body, true), body);
        let e = EStmt::Increment {
            counter: Counter::E,
            amount: Expr::int(1),
        };
        assert_eq!(merge_block(&[inc("1"), e.clone()], true).len(), 2);
    }

    fn for_loop(index: &str, hi: &str, body: Vec<EStmt>) -> EStmt {
        EStmt::For {
            index: index.into(),
            lo: Expr::int(0),
            hi: parse_cexpr(hi).unwrap(),
            body,
        }
    }

    #[test]
    fn lift_constant_and_polynomial() {
        let lifted = lift_loop_increment(&for_loop("k", "N", vec![inc("c")])).unwrap();
        assert_eq!(lifted, EStmt::Increment { counter: Counter::T, amount: simplify(&parse_cexpr("c * N").unwrap()) });
        let EStmt::Increment { amount, .. } = lift_loop_increment(&for_loop("i", "N", vec![inc("i")])).unwrap() else {
            panic!()
        };
        let expect = parse_cexpr("N * (N - 1) / 2").unwrap();
        for n in 0..20 {
            let env = crate::symexpr::Env::new().with("N", n as f64);
            let got = crate::symexpr::evaluate(&amount, &env).unwrap();
            assert_eq!(got, crate::symexpr::evaluate(&expect, &env).unwrap());
        }
    }

    #[test]
    fn lift_refuses() {
        let with_let = for_loop(
            "i",
            "N",
            vec![
                EStmt::Let {
                    name: "x".into(),
                    value: parse_cexpr("i").unwrap(),
                },
                inc("x"),
            ],
        );
        assert_eq!(lift_loop_increment(&with_let), Err(LiftError::NotApplicable));
        assert_eq!(
            lift_loop_increment(&for_loop("i", "N", vec![inc("log(i + 1)")])),
            Err(LiftError::NotApplicable)
        );
    }

    #[test]
    fn three_rotation_loops_become_one_increment() {
        let p = parse(
            "def main(n: int) { for i in 0..n { Rz(i, 0.1); } for i in 0..n { Rz(i, 0.2); } for i in 0..n { Rz(i, 0.3); } }",
        )
        .unwrap();
        let ep = make_cost_estimator(&p, &GateSet::clifford_t(), Granularity::unlimited()).unwrap();
        let prepared = prepare(&ep);
        let body = &prepared.entry().unwrap().body;
        assert_eq!(body.len(), 1, "{body:?}");
        let EStmt::Increment { amount, .. } = &body[0] else { panic!() };
        assert_eq!(crate::symexpr::free_vars(amount).len(), 4);
    }
}
