//! Simulated annealing over epsilon variables: minimize cost under an error
//! budget, or minimize error under a cost budget.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::extract::EPS_DOMAIN;
use crate::symexpr::{evaluate, free_vars, simplify, Env, EvalError, Expr};

const PROBES: usize = 20;
const COOLING_INTERVAL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Auto,
    Fixed(f64),
}

impl Serialize for Temperature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Temperature::Auto => s.serialize_str("auto"),
            Temperature::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Temperature, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Value(f64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Value(t) => Ok(Temperature::Fixed(t)),
            Repr::Word(w) if w.eq_ignore_ascii_case("auto") => Ok(Temperature::Auto),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("expected a number or \"auto\", got `{w}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct AnnealConfig {
    pub iterations: usize,
    pub restarts: usize,
    pub initial_temperature: Temperature,
    pub cooling_factor: f64,
    pub move_sigma: f64,
    pub seed: u64,
    /// Per-variable search intervals; unlisted variables use the epsilon
    /// default domain.
    pub domains: BTreeMap<String, (f64, f64)>,
}

impl Default for AnnealConfig {
    fn default() -> AnnealConfig {
        AnnealConfig {
            iterations: 1000,
            restarts: 5,
            initial_temperature: Temperature::Auto,
            cooling_factor: 0.95,
            move_sigma: 0.5,
            seed: 0,
            domains: BTreeMap::new(),
        }
    }
}

impl AnnealConfig {
    pub fn check(&self) -> Result<(), AnnealError> {
        let bad = |m: String| Err(AnnealError::InvalidConfig(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return bad(format!("coolingFactor must lie in (0, 1), got {}", self.cooling_factor));
        }
        if !(self.move_sigma > 0.0 && self.move_sigma.is_finite()) {
            return bad(format!("moveSigma must be positive, got {}", self.move_sigma));
        }
        if let Temperature::Fixed(t) = self.initial_temperature {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("initialTemperature must be positive, got {t}"));
            }
        }
        for (name, (lo, hi)) in &self.domains {
            if !(*lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("domain of `{name}` must be a positive interval, got [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    fn domain(&self, name: &str) -> (f64, f64) {
        self.domains.get(name).copied().unwrap_or(EPS_DOMAIN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Mode {
    /// Minimize cost subject to `E <= budget`.
    MinCost,
    /// Minimize error subject to `T <= budget`.
    MinError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizationResult {
    pub mode: Mode,
    pub budget: f64,
    pub assignment: BTreeMap<String, f64>,
    pub achieved_cost: f64,
    pub achieved_error: f64,
    pub feasible: bool,
    pub evaluations: usize,
    /// Best feasible objective of each restart, `None` if it found none.
    pub best_per_restart: Vec<Option<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnealError {
    #[error("no feasible assignment found ({} evaluations)", .0.evaluations)]
    Infeasible(Box<OptimizationResult>),
    #[error("evaluation failed: {0}")]
    Evaluation(#[from] EvalError),
    #[error("invalid annealing configuration: {0}")]
    InvalidConfig(String),
    #[error("budget must be finite and non-negative, got {0}")]
    InvalidBudget(f64),
}

struct Problem<'a> {
    mode: Mode,
    objective: Expr,
    constraint: Expr,
    budget: f64,
    vars: Vec<String>,
    domains: Vec<(f64, f64)>,
    fixed: &'a Env,
    cfg: &'a AnnealConfig,
}

#[derive(Clone, Copy)]
struct Point {
    f: f64,
    g: f64,
}

impl Point {
    fn violation(&self, budget: f64) -> f64 {
        (self.g - budget).max(0.0)
    }
}

struct Chain<'p, 'a> {
    p: &'p Problem<'a>,
    evals: usize,
    best: Option<(f64, Vec<f64>)>,
    least_violation: Option<(f64, Vec<f64>)>,
}

impl Chain<'_, '_> {
    fn eval(&mut self, x: &[f64]) -> Result<Point, EvalError> {
        let mut env = self.p.fixed.clone();
        for (name, v) in self.p.vars.iter().zip(x) {
            env.set(name.clone(), *v);
        }
        self.evals += 1;
        let pt = Point {
            f: evaluate(&self.p.objective, &env)?,
            g: evaluate(&self.p.constraint, &env)?,
        };
        let viol = pt.violation(self.p.budget);
        if viol == 0.0 && self.best.as_ref().is_none_or(|(f, _)| pt.f < *f) {
            self.best = Some((pt.f, x.to_vec()));
        }
        if self.least_violation.as_ref().is_none_or(|(v, _)| viol < *v) {
            self.least_violation = Some((viol, x.to_vec()));
        }
        Ok(pt)
    }

    fn clamp(&self, k: usize, v: f64) -> f64 {
        let (lo, hi) = self.p.domains[k];
        v.clamp(lo, hi)
    }

    /// Coordinate line search in log space that shrinks the constraint
    /// violation, with doubling steps.
    fn repair(&mut self, x: &mut Vec<f64>, mut cur: Point, budget: usize) -> Result<Point, EvalError> {
        let start = self.evals;
        let b = self.p.budget;
        'rounds: loop {
            let before = cur.violation(b);
            for k in 0..x.len() {
                if cur.violation(b) == 0.0 {
                    break 'rounds;
                }
                for dir in [-1.0, 1.0] {
                    let mut step = 1.0;
                    let mut moved = false;
                    loop {
                        if self.evals - start >= budget {
                            break 'rounds;
                        }
                        let mut y = x.clone();
                        y[k] = self.clamp(k, x[k] * f64::exp(dir * step));
                        if y[k] == x[k] {
                            break;
                        }
                        let pt = self.eval(&y)?;
                        let (v, v0) = (pt.violation(b), cur.violation(b));
                        if v < v0 {
                            *x = y;
                            cur = pt;
                            moved = true;
                            if v == 0.0 {
                                break;
                            }
                            step *= 2.0;
                        } else {
                            break;
                        }
                    }
                    if moved {
                        break;
                    }
                }
            }
            if cur.violation(b) >= before {
                break;
            }
        }
        Ok(cur)
    }

    fn run(&mut self, restart: usize, rng: &mut ChaCha8Rng) -> Result<(), EvalError> {
        let cfg = self.p.cfg;
        let n = self.p.vars.len();
        let b = self.p.budget;
        let mut x = initial_point(self.p);
        if restart > 0 {
            let jitter = Normal::new(0.0, cfg.move_sigma).expect("positive sigma");
            for k in 0..n {
                x[k] = self.clamp(k, x[k] * jitter.sample(rng).exp());
            }
        }
        let mut cur = self.eval(&x)?;
        if n == 0 {
            return Ok(());
        }
        let probes = PROBES.min(cfg.iterations);
        if cur.violation(b) > 0.0 {
            cur = self.repair(&mut x, cur, cfg.iterations - probes)?;
        }
        // Scaled at the repaired start, where the objective is representative.
        let kappa = {
            let k = 10.0 * cur.f.abs();
            if k > 0.0 && k.is_finite() {
                k
            } else {
                1.0
            }
        };
        let scale = if b > 0.0 { b } else { 1.0 };
        let penalized = |pt: &Point| pt.f + kappa * pt.violation(b) / scale;

        let propose = |x: &[f64], rng: &mut ChaCha8Rng, chain: &Self| -> Vec<f64> {
            let k = rng.random_range(0..n);
            let step = Normal::new(0.0, cfg.move_sigma).expect("positive sigma").sample(rng);
            let mut y = x.to_vec();
            y[k] = chain.clamp(k, x[k] * step.exp());
            y
        };

        let mut temp = match cfg.initial_temperature {
            Temperature::Fixed(t) => t,
            Temperature::Auto => {
                let mut deltas = Vec::with_capacity(probes);
                for _ in 0..probes {
                    let y = propose(&x, rng, self);
                    let pt = self.eval(&y)?;
                    deltas.push((pt.f - cur.f).abs());
                }
                deltas.sort_by(f64::total_cmp);
                let med = deltas.get(deltas.len() / 2).copied().unwrap_or(0.0);
                if med > 0.0 && med.is_finite() {
                    med
                } else {
                    1.0
                }
            }
        };

        let mut energy = penalized(&cur);
        for it in 0..cfg.iterations {
            let y = propose(&x, rng, self);
            let pt = self.eval(&y)?;
            let e = penalized(&pt);
            let delta = e - energy;
            if delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp() {
                x = y;
                energy = e;
            }
            if (it + 1) % COOLING_INTERVAL == 0 {
                temp *= cfg.cooling_factor;
            }
        }
        Ok(())
    }
}

fn initial_point(p: &Problem) -> Vec<f64> {
    let n = p.vars.len().max(1) as f64;
    p.domains
        .iter()
        .map(|&(lo, hi)| match p.mode {
            Mode::MinCost => (p.budget / (2.0 * n)).clamp(lo, hi),
            Mode::MinError => (lo * hi).sqrt().clamp(lo, hi),
        })
        .collect()
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed.wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn solve(
    mode: Mode,
    cost: &Expr,
    error: &Expr,
    budget: f64,
    fixed: &Env,
    cfg: &AnnealConfig,
) -> Result<OptimizationResult, AnnealError> {
    cfg.check()?;
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(AnnealError::InvalidBudget(budget));
    }
    let fixed_map: std::collections::HashMap<String, Expr> =
        fixed.sorted().into_iter().map(|(k, v)| (k, Expr::num(v))).collect();
    let cost = simplify(&cost.substitute(&fixed_map));
    let error = simplify(&error.substitute(&fixed_map));
    let mut vars: Vec<String> = free_vars(&cost).into_iter().collect();
    for v in free_vars(&error) {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    vars.sort();
    let (objective, constraint) = match mode {
        Mode::MinCost => (cost.clone(), error.clone()),
        Mode::MinError => (error.clone(), cost.clone()),
    };
    let problem = Problem {
        mode,
        objective,
        constraint,
        budget,
        domains: vars.iter().map(|v| cfg.domain(v)).collect(),
        vars,
        fixed,
        cfg,
    };

    let runs: Vec<Result<(usize, Option<(f64, Vec<f64>)>, Option<(f64, Vec<f64>)>), EvalError>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, r));
            let mut chain = Chain {
                p: &problem,
                evals: 0,
                best: None,
                least_violation: None,
            };
            chain.run(r, &mut rng)?;
            Ok((chain.evals, chain.best, chain.least_violation))
        })
        .collect();

    let mut evaluations = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut fallback: Option<(f64, Vec<f64>)> = None;
    let mut best_per_restart = Vec::with_capacity(cfg.restarts);
    for run in runs {
        let (evals, b, lv) = run?;
        evaluations += evals;
        best_per_restart.push(b.as_ref().map(|(f, _)| *f));
        // Strict comparison keeps the lowest restart index on ties.
        if let Some((f, x)) = b {
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
        if let Some((v, x)) = lv {
            if fallback.as_ref().is_none_or(|(bv, _)| v < *bv) {
                fallback = Some((v, x));
            }
        }
    }

    let feasible = best.is_some();
    let x = best
        .or(fallback)
        .map(|(_, x)| x)
        .unwrap_or_else(|| initial_point(&problem));
    let assignment: BTreeMap<String, f64> = problem.vars.iter().cloned().zip(x).collect();
    let mut env = fixed.clone();
    for (k, v) in &assignment {
        env.set(k.clone(), *v);
    }
    let achieved_cost = evaluate(&cost, &env)?;
    let achieved_error = evaluate(&error, &env)?;
    let result = OptimizationResult {
        mode,
        budget,
        assignment,
        achieved_cost,
        achieved_error,
        feasible,
        evaluations,
        best_per_restart,
        seed: cfg.seed,
    };
    if feasible {
        Ok(result)
    } else {
        Err(AnnealError::Infeasible(Box::new(result)))
    }
}

/// Minimizes `cost` over the free epsilon variables subject to
/// `error <= error_budget`. Variables bound in `fixed` are not searched.
pub fn solve_min_cost(
    cost: &Expr,
    error: &Expr,
    error_budget: f64,
    fixed: &Env,
    cfg: &AnnealConfig,
) -> Result<OptimizationResult, AnnealError> {
    solve(Mode::MinCost, cost, error, error_budget, fixed, cfg)
}

/// Minimizes `error` subject to `cost <= cost_budget`.
pub fn solve_min_error(
    cost: &Expr,
    error: &Expr,
    cost_budget: f64,
    fixed: &Env,
    cfg: &AnnealConfig,
) -> Result<OptimizationResult, AnnealError> {
    solve(Mode::MinError, cost, error, cost_budget, fixed, cfg)
}
