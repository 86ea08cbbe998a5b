//! Accuracy-aware resource estimation for quantum programs.
//!
//! Programs written in a small DSL are turned into estimator programs that
//! count a cost (T gates by default) or accumulate an error bound. Those are
//! summarized into closed-form symbolic expressions in the program
//! parameters and the error-budget variables, which an annealing optimizer
//! then uses to split a global error budget.

pub mod symexpr;
pub mod ir;
pub mod extract;
pub mod summarize;
pub mod oracle;
pub mod stdlib;
pub mod anneal;
