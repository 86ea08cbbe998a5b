use std::collections::BTreeSet;

use proptest::prelude::*;
use qepsc::extract::{
    collect_epsilons, hoist_conditional, make_cost_estimator, mangle, make_error_estimator, substitute_dontcares, Counter, EStmt, Granularity,
};
use qepsc::ir::{emit, parse, validate, GateSet, Program};
use qepsc::oracle::{instantiate, interpret};
use qepsc::stdlib::{self, Options};
use qepsc::summarize::summarize_program;
use qepsc::symexpr::{free_vars, Env, SummaryKind};

#[derive(Debug, Clone)]
enum G {
    Gate(u8),
    Loop(u8, Vec<G>),
    If(u8, i64, Vec<G>, Vec<G>),
    Measure(Vec<G>, Vec<G>),
    Call(bool),
}

fn tree() -> impl Strategy<Value = Vec<G>> {
    let leaf = prop_oneof![(0u8..5).prop_map(G::Gate), any::<bool>().prop_map(G::Call)];
    let node = leaf.prop_recursive(3, 24, 3, |inner| {
        let block = prop::collection::vec(inner, 0..3);
        prop_oneof![
            2 => (0u8..4, block.clone()).prop_map(|(h, b)| G::Loop(h, b)),
            1 => (0u8..4, 0i64..4, block.clone(), block.clone()).prop_map(|(c, k, t, e)| G::If(c, k, t, e)),
            1 => (block.clone(), block).prop_map(|(t, e)| G::Measure(t, e)),
        ]
    });
    prop::collection::vec(node, 1..4)
}

const HELPER: &str = "\
def helper(m: int) {
    epsilon eps_H;
    let c = ceil(log2(1 / eps_H));
    for k in 0..m + c {
        Rz(k, 0.1);
    }
    T(0);
}
";

/// `capped` says every enclosing loop index stays below `n`.
fn render(body: &[G], depth: usize, capped: bool, out: &mut String) {
    let pad = "    ".repeat(depth + 1);
    // Innermost loop index, or the size parameter at top level.
    let here = if depth == 0 { "n".to_string() } else { format!("i{}", depth - 1) };
    for g in body {
        match g {
            G::Gate(0) => out.push_str(&format!("{pad}H(0);\n")),
            G::Gate(1) => out.push_str(&format!("{pad}T(0);\n")),
            G::Gate(2) => out.push_str(&format!("{pad}Rz(0, theta);\n")),
            G::Gate(3) => out.push_str(&format!("{pad}Rz(1, 0.3);\n")),
            G::Gate(_) => out.push_str(&format!("{pad}CNOT(0, 1);\n")),
            G::Call(inner) => {
                let arg = if *inner && depth > 0 { format!("{here} + 1") } else { "n".to_string() };
                out.push_str(&format!("{pad}helper({arg});\n"));
            }
            G::Loop(h, b) => {
                let hi = match (h, depth) {
                    (0, _) => "n".to_string(),
                    (1, _) => "3".to_string(),
                    (2, d) if d > 0 && capped => format!("n - {here}"),
                    (_, d) if d > 0 => format!("{here} + 1"),
                    _ => "n + 1".to_string(),
                };
                out.push_str(&format!("{pad}for i{depth} in 0..{hi} {{\n"));
                let inner_capped = capped && (*h == 0 || (*h == 2 && depth > 0));
                render(b, depth + 1, inner_capped, out);
                out.push_str(&format!("{pad}}}\n"));
            }
            G::If(c, k, t, e) => {
                let op = ["<", "<=", ">", ">="][*c as usize];
                out.push_str(&format!("{pad}if {here} {op} {k} {{\n"));
                render(t, depth, capped, out);
                out.push_str(&format!("{pad}}} else {{\n"));
                render(e, depth, capped, out);
                out.push_str(&format!("{pad}}}\n"));
            }
            G::Measure(t, e) => {
                out.push_str(&format!("{pad}ifmeasure {{\n"));
                render(t, depth, capped, out);
                out.push_str(&format!("{pad}}} else {{\n"));
                render(e, depth, capped, out);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
    }
}

fn program(body: &[G]) -> String {
    let mut src = format!("{HELPER}\ndef main(n: int, @dontcare theta: real) {{\n");
    render(body, 0, true, &mut src);
    src.push_str("}\n");
    src
}

fn env(n: i64) -> Env {
    Env::new()
        .with("n", n as f64)
        .with("theta", 0.7)
        .with("eps_R", 1e-3)
        .with("eps_H", 0.01)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn emit_parse_fixed_point(body in tree()) {
        let src = program(&body);
        let p = parse(&src).unwrap();
        prop_assert!(validate(&p, &GateSet::clifford_t()).is_empty(), "{src}");
        let text = emit(&p);
        let q = parse(&text).unwrap();
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(emit(&q), text);
        prop_assert_eq!(Program::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn estimator_agrees_with_instantiation(body in tree(), n in 0i64..6) {
        let gs = GateSet::clifford_t();
        let p = substitute_dontcares(&parse(&program(&body)).unwrap(), &gs);
        let g = Granularity::default();
        let env = env(n);
        let counts = instantiate(&p, &gs, g, &env).unwrap();
        let t = interpret(&make_cost_estimator(&p, &gs, g).unwrap(), &env).unwrap();
        let e = interpret(&make_error_estimator(&p, &gs, g).unwrap(), &env).unwrap();
        prop_assert!(close(t, counts.t_cost), "{t} vs {}", counts.t_cost);
        prop_assert!(close(e, counts.error), "{e} vs {}", counts.error);
    }

    #[test]
    fn summaries_bound_the_oracle(body in tree(), n in 0i64..6) {
        let gs = GateSet::clifford_t();
        let p = parse(&program(&body)).unwrap();
        let g = Granularity::default();
        let env = env(n);
        let plain = substitute_dontcares(&p, &gs);
        for c in [Counter::T, Counter::E] {
            let s = summarize_program(&p, &gs, g, c).unwrap();
            let got = s.evaluate(&env).unwrap();
            let ep = match c {
                Counter::T => make_cost_estimator(&plain, &gs, g),
                Counter::E => make_error_estimator(&plain, &gs, g),
            };
            let want = interpret(&ep.unwrap(), &env).unwrap();
            match s.kind {
                SummaryKind::Exact => prop_assert!(close(got, want), "{c}: {} = {got}, oracle {want}", s.expr),
                SummaryKind::UpperBound => prop_assert!(got >= want * (1.0 - 1e-9), "{c}: {} = {got} < {want}", s.expr),
            }
            prop_assert!(!free_vars(&s.expr).contains("theta"));
        }
    }

    #[test]
    fn dont_care_angles_do_not_change_counts(body in tree(), n in 0i64..5, theta in -10.0f64..10.0) {
        let gs = GateSet::clifford_t();
        let p = parse(&program(&body)).unwrap();
        let g = Granularity::default();
        let a = instantiate(&p, &gs, g, &env(n)).unwrap();
        let b = instantiate(&p, &gs, g, &env(n).with("theta", theta)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn finer_granularity_refines(body in tree(), n in 0i64..5, eps in 1e-6f64..0.1) {
        let gs = GateSet::clifford_t();
        let p = substitute_dontcares(&parse(&program(&body)).unwrap(), &gs);
        let levels = [Granularity::depth(0), Granularity::depth(1), Granularity::depth(2), Granularity::unlimited()];
        for w in levels.windows(2) {
            let coarse: BTreeSet<String> = collect_epsilons(&p, &gs, w[0]).into_iter().map(|v| v.mangled_name).collect();
            let merged: BTreeSet<String> = collect_epsilons(&p, &gs, w[1])
                .iter()
                .map(|v| mangle(&v.context_path, &v.source_name, w[0]))
                .collect();
            prop_assert_eq!(merged, coarse);
        }
        for c in [Counter::T, Counter::E] {
            let mut oracle = Vec::new();
            let mut exact = Vec::new();
            for g in levels {
                let ep = match c {
                    Counter::T => make_cost_estimator(&p, &gs, g),
                    Counter::E => make_error_estimator(&p, &gs, g),
                }
                .unwrap();
                let mut env = Env::new().with("n", n as f64);
                for v in ep.epsilon_names() {
                    env.set(v, eps);
                }
                oracle.push(interpret(&ep, &env).unwrap());
                let s = summarize_program(&p, &gs, g, c).unwrap();
                if s.kind == SummaryKind::Exact {
                    exact.push(s.evaluate(&env).unwrap());
                }
            }
            prop_assert!(oracle.windows(2).all(|w| w[0] == w[1]), "{c}: {oracle:?}");
            for v in exact {
                prop_assert!(close(v, oracle[0]), "{c}: {v} vs {}", oracle[0]);
            }
        }
    }

    #[test]
    fn hoisting_preserves_counts(op in 0usize..4, cut in prop::sample::select(vec!["2", "2.5", "n / 3", "n - 1", "0 - 1"]), lo in 0i64..3, n in 0i64..12) {
        let src = format!(
            "def main(n: int) {{ for i in {lo}..n + 2 {{ if i {} {cut} {{ T(0); T(0); }} }} }}",
            ["<", "<=", ">", ">="][op]
        );
        let gs = GateSet::clifford_t();
        let ep = make_cost_estimator(&parse(&src).unwrap(), &gs, Granularity::default()).unwrap();
        let mut hoisted = ep.clone();
        let body = &mut hoisted.subroutines.iter_mut().find(|s| s.name == "main").unwrap().body;
        let rewritten: Vec<EStmt> = body.iter().map(|s| hoist_conditional(s).unwrap()).collect();
        *body = rewritten;
        let env = Env::new().with("n", n as f64);
        prop_assert_eq!(interpret(&ep, &env).unwrap(), interpret(&hoisted, &env).unwrap(), "{}", src);
    }
}

#[test]
fn stdlib_summaries_match_oracle_at_spot_bindings() {
    let gs = GateSet::clifford_t();
    let g = Granularity::default();
    let cases = [
        ("qpe_simplified", 4, vec![("eps_QPE", 0.1), ("eps_TE", 0.04), ("eps_R", 2f64.powi(-10))]),
        ("qpe_with_qft", 4, vec![("eps_QPE", 0.1), ("eps_TE", 0.04), ("eps_R", 2f64.powi(-10))]),
        ("shor", 4, vec![("eps_QFT", 0.05), ("eps_R", 1e-6)]),
        ("tfim_trotter", 5, vec![("eps_TE", 0.04), ("eps_R", 1e-4)]),
    ];
    for (name, n, eps) in cases {
        let p = stdlib::build(name, &Options::default()).unwrap();
        let mut env = Env::new().with("n", n as f64);
        for (k, v) in eps {
            env.set(k, v);
        }
        let counts = instantiate(&p, &gs, g, &env).unwrap();
        for (c, want) in [(Counter::T, counts.t_cost), (Counter::E, counts.error)] {
            let s = summarize_program(&p, &gs, g, c).unwrap();
            let got = s.evaluate(&env).unwrap();
            match s.kind {
                SummaryKind::Exact => assert!(close(got, want), "{name} {c}: {got} vs {want}"),
                SummaryKind::UpperBound => assert!(got >= want * (1.0 - 1e-9), "{name} {c}: {got} < {want}"),
            }
        }
    }
}
