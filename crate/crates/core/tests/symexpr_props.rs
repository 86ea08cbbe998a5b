use std::collections::HashMap;

use num_rational::Ratio;
use proptest::prelude::*;
use qepsc::symexpr::{
    evaluate, evaluate_exact, expand, faulhaber, parse_sexpr, simplify, sum_elim, to_text, Env, Expr, SummaryKind,
    TextFormat,
};

const VARS: [&str; 3] = ["x", "y", "z"];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        prop::sample::select(VARS.to_vec()).prop_map(Expr::var),
        (-3i64..=6).prop_map(Expr::int),
        prop::sample::select(vec![0.5, 2.5, 1e-3, 3.25]).prop_map(Expr::num),
    ]
}

/// Expressions over x, y, z. Rounding and logarithms only wrap leaves, so a
/// reassociated evaluation cannot cross an integer or leave the domain.
fn expr() -> impl Strategy<Value = Expr> {
    let rounded = prop_oneof![
        prop::sample::select(VARS.to_vec()).prop_map(|v| Expr::ceil(Expr::var(v))),
        prop::sample::select(VARS.to_vec()).prop_map(|v| Expr::floor(Expr::var(v))),
        prop::sample::select(VARS.to_vec()).prop_map(|v| Expr::log(Expr::var(v))),
        prop::sample::select(VARS.to_vec()).prop_map(|v| Expr::log2(Expr::var(v))),
    ];
    prop_oneof![3 => leaf(), 1 => rounded].prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), 1i64..=4).prop_map(|(a, k)| Expr::try_div(a, Expr::int(k)).unwrap()),
            (inner.clone(), 0i64..=3).prop_map(|(a, k)| Expr::pow(a, Expr::int(k))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::min(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::max(a, b)),
            inner.clone().prop_map(|a| Expr::exp2(Expr::min(a, Expr::int(8)))),
        ]
    })
}

fn env() -> impl Strategy<Value = Env> {
    (0.1f64..9.9, 0.1f64..9.9, 0.1f64..9.9).prop_map(|(x, y, z)| Env::new().with("x", x).with("y", y).with("z", z))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-7 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn simplify_preserves_value(e in expr(), env in env()) {
        let v = evaluate(&e, &env).unwrap();
        prop_assume!(v.is_finite() && v.abs() < 1e9);
        let s = evaluate(&simplify(&e), &env).unwrap();
        prop_assert!(close(v, s), "{e} = {v}, simplified {} = {s}", simplify(&e));
    }

    #[test]
    fn expand_preserves_value(e in expr(), env in env()) {
        let v = evaluate(&e, &env).unwrap();
        prop_assume!(v.is_finite() && v.abs() < 1e9);
        let s = evaluate(&expand(&e), &env).unwrap();
        prop_assert!(close(v, s), "{e} = {v}, expanded = {s}");
    }

    #[test]
    fn simplify_is_idempotent(e in expr()) {
        let once = simplify(&e);
        prop_assert_eq!(simplify(&once), once);
    }

    #[test]
    fn sexpr_round_trip(e in expr()) {
        let text = to_text(&e, TextFormat::Sexpr);
        let back = parse_sexpr(&text).unwrap();
        prop_assert_eq!(&back, &simplify(&e), "{}", text);
        prop_assert_eq!(to_text(&back, TextFormat::Sexpr), text);
    }

    #[test]
    fn sum_elim_matches_brute_force(
        coeffs in prop::collection::vec(-4i64..=4, 1..=4),
        with_n in any::<bool>(),
        lo in 0i64..4,
        len in 0i64..40,
        shape in 0usize..4,
    ) {
        let i = Expr::var("i");
        let mut body = Expr::zero();
        for (d, c) in coeffs.iter().enumerate() {
            body = body + Expr::int(*c) * Expr::pow(i.clone(), Expr::int(d as i64));
        }
        if with_n {
            body = body + Expr::var("n") * i.clone();
        }
        let body = match shape {
            0 => body,
            1 => body + Expr::exp2(i.clone()),
            2 => Expr::max(Expr::int(0), Expr::min(i.clone(), Expr::int(7))) + Expr::pow(i.clone(), Expr::int(2)),
            _ => Expr::ceil(Expr::log2(i.clone() + Expr::int(1))),
        };
        let hi = Expr::var("n") + Expr::int(lo);
        let (closed, kind) = sum_elim(&Expr::sum("i", Expr::int(lo), hi, body.clone()));
        let n = len as f64;
        let env = Env::new().with("n", n);
        let mut brute = 0.0;
        for k in lo..lo + len {
            brute += evaluate(&body, &env.clone().with("i", k as f64)).unwrap();
        }
        let got = evaluate(&closed, &env).unwrap();
        match kind {
            SummaryKind::Exact => prop_assert!(close(got, brute), "{closed}: {got} vs {brute}"),
            SummaryKind::UpperBound => prop_assert!(got >= brute - 1e-9 * brute.abs().max(1.0), "{closed}: {got} < {brute}"),
        }
    }
}

#[test]
fn faulhaber_is_exact_to_a_thousand() {
    for p in 0..=4u32 {
        let closed = faulhaber(p, &Expr::var("N")).unwrap();
        let mut brute: u128 = 0;
        for n in 0..=1000u128 {
            let env = Env::new().with("N", n as f64);
            assert_eq!(evaluate(&closed, &env).unwrap(), brute as f64, "p={p} N={n}");
            let exact = HashMap::from([("N".to_string(), n as i128)]);
            assert_eq!(evaluate_exact(&closed, &exact), Some(Ratio::from_integer(brute as i128)), "p={p} N={n}");
            brute += n.pow(p);
        }
    }
}

#[test]
fn wolfram_and_latex_render_table_forms() {
    let qft_e = simplify(&parse_sexpr("(* (* 1.5 eps_R) (* n (- n 1)))").unwrap());
    assert!(to_text(&qft_e, TextFormat::Wolfram).contains("eps$R"));
    assert!(to_text(&qft_e, TextFormat::Latex).contains(r"\varepsilon_{\mathrm{R}}"));
}
