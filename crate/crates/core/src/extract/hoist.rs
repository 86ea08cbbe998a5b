use thiserror::Error;

use super::EStmt;
use crate::symexpr::{CmpOp, Expr, Node};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HoistError {
    #[error("loop does not consist of a single guard on its index")]
    NotApplicable,
}

/// Turns `for j in lo..hi { if j <= c { body } }` into
/// `for j in lo..min(hi, max(lo, floor(c) + 1)) { body }`. Strict and
/// lower-bound guards are handled the same way. `c` must not depend on `j`.
/// The new bounds keep `lo <= hi` whenever the old ones do.
pub fn hoist_conditional(s: &EStmt) -> Result<EStmt, HoistError> {
    let EStmt::For {
        index,
        lo,
        hi,
        body,
    } = s
    else {
        return Err(HoistError::NotApplicable);
    };
    let [EStmt::If {
        cond,
        then_body,
        else_body,
    }] = body.as_slice()
    else {
        return Err(HoistError::NotApplicable);
    };
    if !else_body.is_empty() {
        return Err(HoistError::NotApplicable);
    }
    let Node::Cmp(op, a, b) = cond.node() else {
        return Err(HoistError::NotApplicable);
    };
    // Normalize to `index op c`.
    let (op, c) = if a.as_var() == Some(index.as_str()) {
        (*op, b)
    } else if b.as_var() == Some(index.as_str()) {
        (op.flipped(), a)
    } else {
        return Err(HoistError::NotApplicable);
    };
    if c.mentions(index) {
        return Err(HoistError::NotApplicable);
    }
    let floor1 = || Expr::floor(c.clone()) + Expr::one();
    let cut = match op {
        CmpOp::Le | CmpOp::Gt => floor1(),
        CmpOp::Lt | CmpOp::Ge => Expr::ceil(c.clone()),
        CmpOp::Eq => return Err(HoistError::NotApplicable),
    };
    let clamped = Expr::min(hi.clone(), Expr::max(lo.clone(), cut));
    let (lo, hi) = match op {
        CmpOp::Le | CmpOp::Lt => (lo.clone(), clamped),
        _ => (clamped, hi.clone()),
    };
    Ok(EStmt::For {
        index: index.clone(),
        lo,
        hi,
        body: then_body.clone(),
    })
}
