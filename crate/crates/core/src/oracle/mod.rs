//! Concrete reference semantics: runs estimator programs over fully bound
//! environments, without any symbolic reasoning.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{
    make_gate_trace, mangle, substitute_dontcares, Counter, EStmt, EstimatorProgram, ExtractError,
    Granularity,
};
use crate::ir::{GateSet, Program};
use crate::symexpr::{CmpOp, Env, EvalError, Expr, Node};

const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("missing value for variable `{0}`")]
    MissingVariable(String),
    #[error("loop `{index}` has non-integer bound {value}")]
    NonIntegerBound { index: String, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("call to undefined subroutine `{0}`")]
    UnknownSubroutine(String),
    #[error("call nesting exceeds {MAX_CALL_DEPTH} levels")]
    RecursionLimit,
    #[error("repetitions must be at least 1")]
    InvalidRepetitions,
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

/// Gate tally of one instantiated circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct GateCounts {
    pub counts: BTreeMap<String, f64>,
    pub t_cost: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Local(usize),
    Global(usize),
}

#[derive(Debug, Clone)]
enum Code {
    Const(f64),
    Slot(Slot),
    Add(Box<Code>, Box<Code>),
    Sub(Box<Code>, Box<Code>),
    Mul(Box<Code>, Box<Code>),
    Div(Box<Code>, Box<Code>),
    Pow(Box<Code>, Box<Code>),
    Min(Box<Code>, Box<Code>),
    Max(Box<Code>, Box<Code>),
    Ceil(Box<Code>),
    Floor(Box<Code>),
    Log(Box<Code>),
    Exp2(Box<Code>),
    Cmp(CmpOp, Box<Code>, Box<Code>),
    Cond(Box<Code>, Box<Code>, Box<Code>),
    Sum(usize, Box<Code>, Box<Code>, Box<Code>),
}

fn nonfinite(what: &str) -> OracleError {
    OracleError::Eval(EvalError::NonFiniteResult(what.to_string()))
}

fn finite(v: f64, what: &str) -> Result<f64, OracleError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(nonfinite(what))
    }
}

impl Code {
    // Mirrors `symexpr::evaluate` operation for operation so both paths
    // round identically.
    fn eval(&self, frame: &mut Vec<f64>, globals: &[f64]) -> Result<f64, OracleError> {
        Ok(match self {
            Code::Const(v) => *v,
            Code::Slot(Slot::Local(k)) => frame[*k],
            Code::Slot(Slot::Global(k)) => globals[*k],
            Code::Add(a, b) => finite(a.eval(frame, globals)? + b.eval(frame, globals)?, "addition")?,
            Code::Sub(a, b) => finite(a.eval(frame, globals)? - b.eval(frame, globals)?, "subtraction")?,
            Code::Mul(a, b) => finite(a.eval(frame, globals)? * b.eval(frame, globals)?, "product")?,
            Code::Div(a, b) => {
                let num = a.eval(frame, globals)?;
                let den = b.eval(frame, globals)?;
                if den == 0.0 {
                    return Err(nonfinite("division by zero"));
                }
                finite(num / den, "division")?
            }
            Code::Pow(a, b) => {
                let base = a.eval(frame, globals)?;
                finite(base.powf(b.eval(frame, globals)?), "power")?
            }
            Code::Min(a, b) => a.eval(frame, globals)?.min(b.eval(frame, globals)?),
            Code::Max(a, b) => a.eval(frame, globals)?.max(b.eval(frame, globals)?),
            Code::Ceil(a) => a.eval(frame, globals)?.ceil(),
            Code::Floor(a) => a.eval(frame, globals)?.floor(),
            Code::Log(a) => {
                let v = a.eval(frame, globals)?;
                if v <= 0.0 {
                    return Err(OracleError::Eval(EvalError::NonFiniteResult(format!("log of {v}"))));
                }
                finite(v.ln(), "logarithm")?
            }
            Code::Exp2(a) => finite(a.eval(frame, globals)?.exp2(), "exp2")?,
            Code::Cmp(op, a, b) => {
                let l = a.eval(frame, globals)?;
                let r = b.eval(frame, globals)?;
                if op.holds(l, r) {
                    1.0
                } else {
                    0.0
                }
            }
            Code::Cond(p, t, e) => {
                if p.eval(frame, globals)? != 0.0 {
                    t.eval(frame, globals)?
                } else {
                    e.eval(frame, globals)?
                }
            }
            Code::Sum(slot, lo, hi, body) => {
                let lo = lo.eval(frame, globals)?.ceil();
                let hi = hi.eval(frame, globals)?;
                let mut total = 0.0;
                let mut i = lo;
                while i < hi {
                    frame[*slot] = i;
                    total += body.eval(frame, globals)?;
                    i += 1.0;
                }
                finite(total, "sum")?
            }
        })
    }
}

#[derive(Debug, Clone)]
enum Ins {
    Inc(Counter, Code),
    Gate(usize, Code, Code),
    Let(usize, Code),
    Call(usize, Vec<Code>),
    For {
        slot: usize,
        index: String,
        lo: Code,
        hi: Code,
        body: Vec<Ins>,
    },
    If(Code, Vec<Ins>, Vec<Ins>),
    Measure(Vec<Ins>, Vec<Ins>),
}

#[derive(Debug, Clone)]
struct Instance {
    locals: usize,
    body: Vec<Ins>,
}

/// An estimator program lowered to slot-addressed code, reusable across
/// environments.
#[derive(Debug, Clone)]
pub struct Compiled {
    instances: Vec<Instance>,
    entry: usize,
    /// Values used for unbound don't-care entry parameters.
    entry_defaults: Vec<Option<f64>>,
    globals: Vec<String>,
    gate_names: Vec<String>,
}

struct Compiler<'a> {
    ep: &'a EstimatorProgram,
    globals: Vec<String>,
    global_ids: HashMap<String, usize>,
    gate_ids: HashMap<String, usize>,
    gate_names: Vec<String>,
    instances: Vec<Option<Instance>>,
    keys: HashMap<(String, Vec<String>), usize>,
}

struct Frame {
    scope: HashMap<String, Slot>,
    next: usize,
}

impl Frame {
    fn fresh(&mut self) -> usize {
        self.next += 1;
        self.next - 1
    }
}

impl Compiler<'_> {
    fn global(&mut self, name: &str) -> usize {
        if let Some(&k) = self.global_ids.get(name) {
            return k;
        }
        self.globals.push(name.to_string());
        self.global_ids.insert(name.to_string(), self.globals.len() - 1);
        self.globals.len() - 1
    }

    fn expr(&mut self, e: &Expr, f: &mut Frame) -> Code {
        let b = |c: Code| Box::new(c);
        match e.node() {
            Node::Const(v) => Code::Const(*v),
            Node::IntConst(v) => Code::Const(*v as f64),
            Node::Var(name) => match f.scope.get(name) {
                Some(s) => Code::Slot(*s),
                None => Code::Slot(Slot::Global(self.global(name))),
            },
            Node::Add(x, y) => Code::Add(b(self.expr(x, f)), b(self.expr(y, f))),
            Node::Sub(x, y) => Code::Sub(b(self.expr(x, f)), b(self.expr(y, f))),
            Node::Mul(x, y) => Code::Mul(b(self.expr(x, f)), b(self.expr(y, f))),
            Node::Div(x, y) => Code::Div(b(self.expr(x, f)), b(self.expr(y, f))),
            Node::Pow(x, y) => Code::Pow(b(self.expr(x, f)), b(self.expr(y, f))),
            Node::Min(x, y) => Code::Min(b(self.expr(x, f)), b(self.expr(y, f))),
            Node::Max(x, y) => Code::Max(b(self.expr(x, f)), b(self.expr(y, f))),
            Node::Ceil(x) => Code::Ceil(b(self.expr(x, f))),
            Node::Floor(x) => Code::Floor(b(self.expr(x, f))),
            Node::Log(x) => Code::Log(b(self.expr(x, f))),
            Node::Exp2(x) => Code::Exp2(b(self.expr(x, f))),
            Node::Cmp(op, x, y) => Code::Cmp(*op, b(self.expr(x, f)), b(self.expr(y, f))),
            Node::Cond {
                pred,
                then,
                otherwise,
            } => Code::Cond(b(self.expr(pred, f)), b(self.expr(then, f)), b(self.expr(otherwise, f))),
            Node::Sum {
                index,
                lo,
                hi,
                body,
            } => {
                let lo = self.expr(lo, f);
                let hi = self.expr(hi, f);
                let slot = f.fresh();
                let saved = f.scope.insert(index.clone(), Slot::Local(slot));
                let body = self.expr(body, f);
                match saved {
                    Some(s) => f.scope.insert(index.clone(), s),
                    None => f.scope.remove(index),
                };
                Code::Sum(slot, b(lo), b(hi), b(body))
            }
        }
    }

    fn instance(&mut self, name: &str, path: &mut Vec<String>) -> Result<usize, OracleError> {
        if path.len() > MAX_CALL_DEPTH {
            return Err(OracleError::RecursionLimit);
        }
        let g = self.ep.granularity;
        let key = (name.to_string(), g.truncate(path).to_vec());
        if let Some(&k) = self.keys.get(&key) {
            return Ok(k);
        }
        let sub = self
            .ep
            .subroutine(name)
            .ok_or_else(|| OracleError::UnknownSubroutine(name.to_string()))?;
        let id = self.instances.len();
        self.instances.push(None);
        self.keys.insert(key, id);
        let mut frame = Frame {
            scope: HashMap::new(),
            next: 0,
        };
        for p in &sub.params {
            let s = frame.fresh();
            frame.scope.insert(p.name.clone(), Slot::Local(s));
        }
        for (local, r) in &sub.eps_refs {
            let mut full = path.clone();
            full.extend(r.rel_path.iter().cloned());
            let gid = self.global(&mangle(&full, &r.source, g));
            frame.scope.insert(local.clone(), Slot::Global(gid));
        }
        let body = self.block(&sub.body, &mut frame, path)?;
        self.instances[id] = Some(Instance {
            locals: frame.next,
            body,
        });
        Ok(id)
    }

    fn block(&mut self, body: &[EStmt], f: &mut Frame, path: &mut Vec<String>) -> Result<Vec<Ins>, OracleError> {
        let saved = f.scope.clone();
        let mut out = Vec::with_capacity(body.len());
        for s in body {
            out.push(match s {
                EStmt::Increment { counter, amount } => Ins::Inc(*counter, self.expr(amount, f)),
                EStmt::Gate { gate, cost, error } => {
                    let next = self.gate_names.len();
                    let id = *self.gate_ids.entry(gate.clone()).or_insert(next);
                    if id == next {
                        self.gate_names.push(gate.clone());
                    }
                    Ins::Gate(id, self.expr(cost, f), self.expr(error, f))
                }
                EStmt::Let { name, value } => {
                    let code = self.expr(value, f);
                    let slot = f.fresh();
                    f.scope.insert(name.clone(), Slot::Local(slot));
                    Ins::Let(slot, code)
                }
                EStmt::Call { callee, args, label } => {
                    let args = args.iter().map(|a| self.expr(a, f)).collect();
                    path.push(label.clone());
                    let id = self.instance(callee, path);
                    path.pop();
                    Ins::Call(id?, args)
                }
                EStmt::For {
                    index,
                    lo,
                    hi,
                    body,
                } => {
                    let lo = self.expr(lo, f);
                    let hi = self.expr(hi, f);
                    let slot = f.fresh();
                    let outer = f.scope.insert(index.clone(), Slot::Local(slot));
                    let body = self.block(body, f, path)?;
                    match outer {
                        Some(s) => f.scope.insert(index.clone(), s),
                        None => f.scope.remove(index),
                    };
                    Ins::For {
                        slot,
                        index: index.clone(),
                        lo,
                        hi,
                        body,
                    }
                }
                EStmt::If {
                    cond,
                    then_body,
                    else_body,
                } => Ins::If(
                    self.expr(cond, f),
                    self.block(then_body, f, path)?,
                    self.block(else_body, f, path)?,
                ),
                EStmt::MeasureBranch {
                    then_body,
                    else_body,
                } => Ins::Measure(self.block(then_body, f, path)?, self.block(else_body, f, path)?),
            });
        }
        f.scope = saved;
        Ok(out)
    }
}

/// Counter values and gate tallies of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunState {
    pub t: f64,
    pub e: f64,
    counts: Vec<f64>,
}

impl RunState {
    pub fn get(&self, c: Counter) -> f64 {
        match c {
            Counter::T => self.t,
            Counter::E => self.e,
        }
    }
}

fn bound(v: f64, index: &str) -> Result<f64, OracleError> {
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(OracleError::NonIntegerBound {
            index: index.to_string(),
            value: v,
        });
    }
    Ok(v)
}

impl Compiled {
    pub fn new(ep: &EstimatorProgram) -> Result<Compiled, OracleError> {
        let mut c = Compiler {
            ep,
            globals: Vec::new(),
            global_ids: HashMap::new(),
            gate_ids: HashMap::new(),
            gate_names: Vec::new(),
            instances: Vec::new(),
            keys: HashMap::new(),
        };
        let entry_sub = ep
            .entry()
            .ok_or_else(|| OracleError::UnknownSubroutine(ep.entry_name.clone()))?;
        let entry_defaults: Vec<Option<f64>> = entry_sub
            .params
            .iter()
            .map(|p| p.dont_care.then(|| p.kind.default_value().as_f64().unwrap_or(0.0)))
            .collect();
        for p in &entry_sub.params {
            c.global(&p.name);
        }
        let entry = c.instance(&ep.entry_name, &mut Vec::new())?;
        Ok(Compiled {
            instances: c.instances.into_iter().map(|i| i.expect("instance compiled")).collect(),
            entry,
            entry_defaults,
            globals: c.globals,
            gate_names: c.gate_names,
        })
    }

    /// Names the environment must bind.
    pub fn required(&self) -> &[String] {
        &self.globals
    }

    pub fn run(&self, env: &Env) -> Result<RunState, OracleError> {
        let globals: Vec<f64> = self
            .globals
            .iter()
            .enumerate()
            .map(|(k, g)| {
                env.get(g)
                    .or_else(|| self.entry_defaults.get(k).copied().flatten())
                    .ok_or_else(|| OracleError::MissingVariable(g.clone()))
            })
            .collect::<Result<_, _>>()?;
        let mut st = RunState {
            counts: vec![0.0; self.gate_names.len()],
            ..RunState::default()
        };
        let args: Vec<f64> = globals[..self.entry_defaults.len()].to_vec();
        self.call(self.entry, &args, &globals, &mut st)?;
        Ok(st)
    }

    fn call(&self, id: usize, args: &[f64], globals: &[f64], st: &mut RunState) -> Result<(), OracleError> {
        let inst = &self.instances[id];
        let mut frame = vec![0.0; inst.locals.max(args.len())];
        frame[..args.len()].copy_from_slice(args);
        self.exec(&inst.body, &mut frame, globals, st)
    }

    fn exec(&self, body: &[Ins], frame: &mut Vec<f64>, globals: &[f64], st: &mut RunState) -> Result<(), OracleError> {
        for ins in body {
            match ins {
                Ins::Inc(Counter::T, c) => st.t += c.eval(frame, globals)?,
                Ins::Inc(Counter::E, c) => st.e += c.eval(frame, globals)?,
                Ins::Gate(id, cost, error) => {
                    st.t += cost.eval(frame, globals)?;
                    st.e += error.eval(frame, globals)?;
                    st.counts[*id] += 1.0;
                }
                Ins::Let(slot, c) => frame[*slot] = c.eval(frame, globals)?,
                Ins::Call(id, args) => {
                    let vals: Vec<f64> = args.iter().map(|a| a.eval(frame, globals)).collect::<Result<_, _>>()?;
                    self.call(*id, &vals, globals, st)?;
                }
                Ins::For {
                    slot,
                    index,
                    lo,
                    hi,
                    body,
                } => {
                    let lo = bound(lo.eval(frame, globals)?, index)?;
                    let hi = bound(hi.eval(frame, globals)?, index)?;
                    let mut i = lo;
                    while i < hi {
                        frame[*slot] = i;
                        self.exec(body, frame, globals, st)?;
                        i += 1.0;
                    }
                }
                Ins::If(c, t, e) => {
                    let taken = if c.eval(frame, globals)? != 0.0 { t } else { e };
                    self.exec(taken, frame, globals, st)?;
                }
                Ins::Measure(t, e) => {
                    let mut other = st.clone();
                    self.exec(t, frame, globals, st)?;
                    self.exec(e, frame, globals, &mut other)?;
                    let e_max = st.e.max(other.e);
                    if other.t > st.t {
                        *st = other;
                    }
                    st.e = e_max;
                }
            }
        }
        Ok(())
    }

    fn counts(&self, st: &RunState) -> GateCounts {
        GateCounts {
            counts: self
                .gate_names
                .iter()
                .zip(&st.counts)
                .map(|(n, c)| (n.clone(), *c))
                .collect(),
            t_cost: st.t,
            error: st.e,
        }
    }
}

/// Runs an estimator and returns the final value of its counter.
pub fn interpret(ep: &EstimatorProgram, env: &Env) -> Result<f64, OracleError> {
    Ok(Compiled::new(ep)?.run(env)?.get(ep.counter))
}

/// Streams the gate sequence of `p` under `env` and tallies it.
pub fn instantiate(p: &Program, gates: &GateSet, g: Granularity, env: &Env) -> Result<GateCounts, OracleError> {
    let trace = make_gate_trace(&substitute_dontcares(p, gates), gates, g)?;
    let c = Compiled::new(&trace)?;
    let st = c.run(env)?;
    Ok(c.counts(&st))
}

/// Median and spread of repeated wall-clock measurements, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub median_ns: f64,
    pub min_ns: f64,
    pub max_ns: f64,
    pub repetitions: usize,
}

/// Times `f` over `repetitions` runs.
pub fn time_with<T, E>(repetitions: usize, mut f: impl FnMut() -> Result<T, E>) -> Result<Result<Timing, E>, OracleError> {
    if repetitions == 0 {
        return Err(OracleError::InvalidRepetitions);
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        if let Err(e) = std::hint::black_box(f()) {
            return Ok(Err(e));
        }
        samples.push(start.elapsed().as_nanos() as f64);
    }
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    let median_ns = if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2.0
    };
    Ok(Ok(Timing {
        median_ns,
        min_ns: samples[0],
        max_ns: samples[samples.len() - 1],
        repetitions,
    }))
}

/// Wall-clock statistics of interpreting `ep` under `env`, compilation
/// included.
pub fn time_estimate(ep: &EstimatorProgram, env: &Env, repetitions: usize) -> Result<Timing, OracleError> {
    time_with(repetitions, || interpret(ep, env))?
}
