//! The `qepsc` command line. Machine-readable output (JSON, CSV, expressions)
//! goes to `out`, diagnostics to `err`.
//!
//! Exit codes: 0 success, 1 usage error, 2 parse or validation failure,
//! 3 infeasible optimization, 4 evaluation error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qepsc::anneal::{self, AnnealConfig, AnnealError, OptimizationResult};
use qepsc::extract::{make_cost_estimator, make_error_estimator, substitute_dontcares, Counter, Granularity};
use qepsc::ir::{self, GateSet, Program};
use qepsc::oracle::{self, time_estimate, time_with};
use qepsc::stdlib::{self, Options};
use qepsc::summarize::{summarize_program, Summary};
use qepsc::symexpr::{evaluate, to_text, Env, TextFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_EVAL: i32 = 4;

/// Epsilon values used by `bench` for every program.
pub const BENCH_EPSILONS: [(&str, f64); 4] = [("eps_QPE", 0.1), ("eps_TE", 0.01), ("eps_R", 1e-3), ("eps_QFT", 0.5)];

#[derive(Parser, Debug)]
#[command(name = "qepsc", version, about = "Accuracy-aware resource estimation for quantum programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check syntax and validate against the gate set.
    Parse {
        #[command(flatten)]
        input: Input,
        /// Print the canonical source instead of a JSON report.
        #[arg(long, conflicts_with = "json")]
        emit: bool,
        /// Print the program as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the cost or error estimator program.
    Extract {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "T")]
        counter: Counter,
        #[arg(long)]
        json: bool,
    },
    /// Print the closed-form summary of one counter.
    Summarize {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "T")]
        counter: Counter,
        #[arg(long, default_value = "sexpr", value_parser = ["sexpr", "wolfram", "latex", "json"])]
        format: String,
    },
    /// Choose epsilon values by simulated annealing.
    Optimize {
        #[command(flatten)]
        input: Input,
        /// Minimize cost subject to total error at most X.
        #[arg(long, value_name = "X", conflicts_with = "t_budget", required_unless_present = "t_budget")]
        eps_budget: Option<f64>,
        /// Minimize error subject to cost at most X.
        #[arg(long, value_name = "X")]
        t_budget: Option<f64>,
        #[command(flatten)]
        bind: Bindings,
        /// Annealing configuration as JSON; the flags below override it.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Instantiate the program at a full binding and tally its gates.
    Count {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        bind: Bindings,
    },
    /// Time symbolic evaluation against oracle interpretation; CSV output.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "qpe_with_aqft,shor")]
        programs: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        sizes: Vec<i64>,
        #[arg(long, default_value = "both", value_parser = ["symbolic", "oracle", "both"])]
        mode: String,
        /// Repetitions per oracle measurement.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Repetitions per symbolic measurement.
        #[arg(long, default_value_t = 201)]
        symbolic_reps: usize,
    },
    /// List or print the built-in programs.
    Stdlib {
        #[command(subcommand)]
        action: StdlibAction,
    },
}

#[derive(Subcommand, Debug)]
enum StdlibAction {
    List,
    Emit {
        name: String,
        #[arg(long)]
        n: Option<i64>,
    },
}

#[derive(Args, Debug)]
struct Input {
    /// DSL source or JSON program file.
    #[arg(required_unless_present = "stdlib", conflicts_with = "stdlib")]
    file: Option<PathBuf>,
    /// Use a built-in program (symbolic in n).
    #[arg(long, value_name = "NAME")]
    stdlib: Option<String>,
    /// Gate-set file, or `clifford_t` / `nisq`. Defaults to $QEPSC_GATESET.
    #[arg(long, value_name = "FILE")]
    gateset: Option<String>,
    /// Call-path depth for epsilon sharing, or `full`.
    #[arg(long, value_name = "K", default_value = "0")]
    context_depth: String,
}

#[derive(Args, Debug)]
struct Bindings {
    /// Bind a program parameter, e.g. `n=8`.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_binding)]
    params: Vec<(String, f64)>,
    /// Fix an epsilon variable, e.g. `eps_R=1e-3`.
    #[arg(long = "eps", value_name = "NAME=VALUE", value_parser = parse_binding)]
    eps: Vec<(String, f64)>,
}

impl Bindings {
    fn env(&self) -> Env {
        let mut env = Env::new();
        for (k, v) in self.params.iter().chain(&self.eps) {
            env.set(k.clone(), *v);
        }
        env
    }
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

type Outcome = Result<(), Failure>;

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let shown = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{shown}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{shown}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Parse { input, emit, json } => cmd_parse(&input, emit, json, out, err),
        Command::Extract { input, counter, json } => {
            let (p, gs, g) = load(&input, err)?;
            let p = substitute_dontcares(&p, &gs);
            let ep = match counter {
                Counter::T => make_cost_estimator(&p, &gs, g),
                Counter::E => make_error_estimator(&p, &gs, g),
            }
            .map_err(|e| fail(EXIT_INVALID, e))?;
            if json {
                emit_json(out, &ep)
            } else {
                emit_line(out, ep.dump().trim_end())
            }
        }
        Command::Summarize { input, counter, format } => {
            let (p, gs, g) = load(&input, err)?;
            let s = summary(&p, &gs, g, counter)?;
            let text = match format.as_str() {
                "json" => s.to_json(),
                f => to_text(&s.expr, f.parse::<TextFormat>().map_err(|e| fail(EXIT_USAGE, e))?),
            };
            emit_line(out, &text)
        }
        Command::Optimize {
            input,
            eps_budget,
            t_budget,
            bind,
            config,
            iters,
            restarts,
            seed,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = read(&path)?;
                    serde_json::from_str::<AnnealConfig>(&text).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))?
                }
                None => AnnealConfig::default(),
            };
            cfg.iterations = iters.unwrap_or(cfg.iterations);
            cfg.restarts = restarts.unwrap_or(cfg.restarts);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cmd_optimize(&input, eps_budget, t_budget, &bind, &cfg, out, err)
        }
        Command::Count { input, bind } => {
            let (p, gs, g) = load(&input, err)?;
            let counts = oracle::instantiate(&p, &gs, g, &bind.env()).map_err(oracle_failure)?;
            emit_json(out, &counts)
        }
        Command::Bench {
            programs,
            sizes,
            mode,
            reps,
            symbolic_reps,
        } => cmd_bench(&programs, &sizes, &mode, reps, symbolic_reps, out),
        Command::Stdlib { action } => match action {
            StdlibAction::List => {
                for name in stdlib::NAMES {
                    emit_line(out, name)?;
                }
                Ok(())
            }
            StdlibAction::Emit { name, n } => {
                let src = stdlib::source(&name, &Options { n, ..Options::default() }).map_err(|e| fail(EXIT_USAGE, e))?;
                write!(out, "{src}").map_err(io_failure)
            }
        },
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    fail(EXIT_USAGE, format!("write failed: {e}"))
}

fn oracle_failure(e: oracle::OracleError) -> Failure {
    match e {
        oracle::OracleError::Extract(e) => fail(EXIT_INVALID, e),
        e => fail(EXIT_EVAL, e),
    }
}

fn emit_line(out: &mut dyn Write, s: &str) -> Outcome {
    writeln!(out, "{s}").map_err(io_failure)
}

fn emit_json<T: serde::Serialize>(out: &mut dyn Write, v: &T) -> Outcome {
    let text = serde_json::to_string_pretty(v).map_err(|e| fail(EXIT_EVAL, e))?;
    emit_line(out, &text)
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))
}

fn gateset(choice: Option<&str>) -> Result<GateSet, Failure> {
    let env = std::env::var("QEPSC_GATESET").ok().filter(|s| !s.is_empty());
    match choice.map(str::to_string).or(env).as_deref() {
        None | Some("clifford_t") => Ok(GateSet::clifford_t()),
        Some("nisq") => Ok(GateSet::nisq()),
        Some(path) => {
            let text = read(&PathBuf::from(path))?;
            ir::load_gateset(&text).map_err(|e| fail(EXIT_INVALID, format!("{path}: {e}")))
        }
    }
}

fn granularity(s: &str) -> Result<Granularity, Failure> {
    match s {
        "full" | "unlimited" => Ok(Granularity::unlimited()),
        k => k
            .parse()
            .map(Granularity::depth)
            .map_err(|_| fail(EXIT_USAGE, format!("--context-depth expects an integer or `full`, got `{k}`"))),
    }
}

fn parse_program(input: &Input) -> Result<Program, Failure> {
    if let Some(name) = &input.stdlib {
        return stdlib::build(name, &Options::default()).map_err(|e| fail(EXIT_USAGE, e));
    }
    let path = input.file.as_ref().expect("clap enforces an input");
    let text = read(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        Program::from_json(&text).map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", path.display())))
    } else {
        ir::parse(&text).map_err(|e| fail(EXIT_INVALID, format!("{}:{e}", path.display())))
    }
}

/// Parses and validates the input; diagnostics go to `err`.
fn load(input: &Input, err: &mut dyn Write) -> Result<(Program, GateSet, Granularity), Failure> {
    let g = granularity(&input.context_depth)?;
    let gs = gateset(input.gateset.as_deref())?;
    let p = parse_program(input)?;
    let diags = ir::validate(&p, &gs);
    if !diags.is_empty() {
        for d in &diags {
            let _ = writeln!(err, "{d}");
        }
        return Err(fail(EXIT_INVALID, format!("{} validation error(s)", diags.len())));
    }
    Ok((p, gs, g))
}

fn summary(p: &Program, gs: &GateSet, g: Granularity, counter: Counter) -> Result<Summary, Failure> {
    summarize_program(p, gs, g, counter).map_err(|e| fail(EXIT_INVALID, e))
}

fn cmd_parse(input: &Input, emit: bool, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let gs = gateset(input.gateset.as_deref())?;
    let p = parse_program(input)?;
    let diags = ir::validate(&p, &gs);
    for d in &diags {
        let _ = writeln!(err, "{d}");
    }
    if emit {
        write!(out, "{}", ir::emit(&p)).map_err(io_failure)?;
    } else if json {
        emit_line(out, &p.to_json())?;
    } else {
        let report = serde_json::json!({
            "valid": diags.is_empty(),
            "entry": p.entry_name,
            "subroutines": p.subroutines.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(),
            "diagnostics": diags,
        });
        emit_json(out, &report)?;
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(fail(EXIT_INVALID, format!("{} validation error(s)", diags.len())))
    }
}

fn cmd_optimize(
    input: &Input,
    eps_budget: Option<f64>,
    t_budget: Option<f64>,
    bind: &Bindings,
    cfg: &AnnealConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    let (p, gs, g) = load(input, err)?;
    let t = summary(&p, &gs, g, Counter::T)?;
    let e = summary(&p, &gs, g, Counter::E)?;
    let fixed = bind.env();
    let mut unbound: Vec<&String> = t.symbol_params.iter().chain(&e.symbol_params).filter(|s| !fixed.contains(s)).collect();
    unbound.sort();
    unbound.dedup();
    if !unbound.is_empty() {
        let names: Vec<&str> = unbound.iter().map(|s| s.as_str()).collect();
        return Err(fail(EXIT_USAGE, format!("unbound program parameters: {} (use --param)", names.join(", "))));
    }
    let result = match (eps_budget, t_budget) {
        (Some(b), _) => anneal::solve_min_cost(&t.expr, &e.expr, b, &fixed, cfg),
        (None, Some(b)) => anneal::solve_min_error(&t.expr, &e.expr, b, &fixed, cfg),
        (None, None) => unreachable!("clap requires a budget"),
    };
    match result {
        Ok(r) => emit_json(out, &r),
        Err(AnnealError::Infeasible(r)) => {
            emit_json::<OptimizationResult>(out, &r)?;
            Err(fail(EXIT_INFEASIBLE, "no feasible assignment found"))
        }
        Err(AnnealError::Evaluation(e)) => Err(fail(EXIT_EVAL, e)),
        Err(e) => Err(fail(EXIT_USAGE, e)),
    }
}

fn cmd_bench(programs: &[String], sizes: &[i64], mode: &str, reps: usize, symbolic_reps: usize, out: &mut dyn Write) -> Outcome {
    let gs = GateSet::clifford_t();
    let g = Granularity::default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["program", "n", "mode", "median_ns", "iterations"]).map_err(|e| fail(EXIT_EVAL, e))?;
    for name in programs {
        let p = stdlib::build(name, &Options::default()).map_err(|e| fail(EXIT_USAGE, e))?;
        let p = substitute_dontcares(&p, &gs);
        let t = summary(&p, &gs, g, Counter::T)?;
        let ep = make_cost_estimator(&p, &gs, g).map_err(|e| fail(EXIT_INVALID, e))?;
        for &n in sizes {
            let mut env = Env::new().with("n", n as f64);
            for (k, v) in BENCH_EPSILONS {
                env.set(k, v);
            }
            let mut rows = Vec::new();
            if mode != "oracle" {
                let timing = time_with(symbolic_reps, || evaluate(&t.expr, &env))
                    .map_err(oracle_failure)?
                    .map_err(|e| fail(EXIT_EVAL, e))?;
                rows.push(("symbolic", timing));
            }
            if mode != "symbolic" {
                rows.push(("oracle", time_estimate(&ep, &env, reps).map_err(oracle_failure)?));
            }
            for (m, timing) in rows {
                w.write_record([
                    name.clone(),
                    n.to_string(),
                    m.to_string(),
                    format!("{:.0}", timing.median_ns),
                    timing.repetitions.to_string(),
                ])
                .map_err(|e| fail(EXIT_EVAL, e))?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| fail(EXIT_EVAL, e))?;
    out.write_all(&bytes).map_err(io_failure)
}
