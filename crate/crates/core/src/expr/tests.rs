use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::{EvalError, ParseErrorKind};

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

#[test]
fn parses_kmm_deformation() {
    let e = parse("1 + beta*(p1^2+p2^2)").unwrap();
    let expected = Expr::Add(
        b(Expr::int(1)),
        b(Expr::Mul(
            b(Expr::named("beta")),
            b(Expr::Add(b(Expr::Pow(b(Expr::p(1)), 2)), b(Expr::Pow(b(Expr::p(2)), 2)))),
        )),
    );
    assert_eq!(e, expected);
}

#[test]
fn parses_angular_kernel() {
    let e = parse("q1*p2 - q2*p1").unwrap();
    let expected = Expr::Sub(
        b(Expr::Mul(b(Expr::q(1)), b(Expr::p(2)))),
        b(Expr::Mul(b(Expr::q(2)), b(Expr::p(1)))),
    );
    assert_eq!(e, expected);
}

#[test]
fn undeclared_symbol_is_rejected_in_scope() {
    let scope = Scope::new().names(["k"]);
    let err = parse_in("sqrt(1 - rho2/k^2)", &scope).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::UnknownSymbol("rho2".into()));
    assert_eq!(err.offset, 9);
    let scope = scope.names(["rho2"]);
    assert!(parse_in("sqrt(1 - rho2/k^2)", &scope).is_ok());
}

#[test]
fn syntax_errors_carry_offsets() {
    let err = parse("1 + * 2").unwrap_err();
    assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
    assert_eq!(err.offset, 4);
    let err = parse("cos(p1)").unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::UnknownFunction("cos".into()));
    assert_eq!(err.offset, 0);
    let err = parse("p1^0.5").unwrap_err();
    assert_eq!(err.offset, 3);
    assert!(parse("(p1 + 1").is_err());
    assert!(parse("p1^2^3").is_err());
    assert!(parse("p1 # 2").is_err());
    let err = parse_in("q4", &Scope::new().dim(3)).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::VariableIndex("q4".into()));
    assert!(parse("q0").is_err());
}

#[test]
fn decimals_are_exact_rationals() {
    assert_eq!(parse("0.5").unwrap(), Expr::rational(1, 2));
    assert_eq!(parse("1.25").unwrap(), Expr::rational(5, 4));
    assert_eq!(rational_from_f64(0.1).unwrap(), *Expr::rational(1, 10).as_num().unwrap());
    assert_eq!(rational_from_f64(-2.0).unwrap(), *Expr::int(-2).as_num().unwrap());
}

#[test]
fn unary_minus_binds_looser_than_power() {
    let x = PhasePoint::new(vec![0.0], vec![3.0]);
    assert_eq!(parse("-p1^2").unwrap().eval(&x).unwrap(), -9.0);
    assert_eq!(parse("(-p1)^2").unwrap().eval(&x).unwrap(), 9.0);
    assert_eq!(parse("2*-p1").unwrap().eval(&x).unwrap(), -6.0);
    assert_eq!(parse("p1^-1").unwrap().eval(&x).unwrap(), 1.0 / 3.0);
}

#[test]
fn eval_examples() {
    let f = parse("1+beta*(p1^2+p2^2)").unwrap();
    let x = PhasePoint::new(vec![0.0, 0.0], vec![0.5, 0.5]).with_param("beta", 0.1);
    // 1 + 0.1 * (0.25 + 0.25)
    assert!((f.eval(&x).unwrap() - 1.05).abs() < 1e-15);
    assert_eq!(parse("3/2").unwrap().eval(&x).unwrap(), 1.5);

    let bad = parse("sqrt(1 - p1^2)").unwrap();
    let x = PhasePoint::new(vec![0.0], vec![2.0]);
    match bad.eval(&x) {
        Err(EvalError::Domain { subexpr, .. }) => assert_eq!(subexpr, "sqrt(1 - p1^2)"),
        other => panic!("expected domain error, got {other:?}"),
    }
    assert!(matches!(parse("1/p1").unwrap().eval(&PhasePoint::new(vec![0.0], vec![0.0])), Err(EvalError::Domain { .. })));
    assert_eq!(parse("gamma").unwrap().eval(&x), Err(EvalError::Unbound("gamma".into())));
}

#[test]
fn compiled_matches_tree() {
    let e = parse("sqrt(1 + beta*(p1^2 + p2^2))*q1 - exp(-q2)/(2 + p1)").unwrap();
    let params = BTreeMap::from([("beta".to_string(), 0.3)]);
    let c = Compiled::new(&e, &params).unwrap();
    let x = PhasePoint::new(vec![0.2, -0.7], vec![0.4, 0.1]).with_params(&params);
    assert_eq!(c.eval(&x.q, &x.p).unwrap(), e.eval(&x).unwrap());
    assert!(Compiled::new(&e, &BTreeMap::new()).is_err());
    let r = Compiled::with_vars(&parse("sqrt(1 + rho^2)").unwrap(), &params, &["rho"]).unwrap();
    assert_eq!(r.eval_with(&[], &[], &[0.75]).unwrap(), 1.5625f64.sqrt());
}

#[test]
fn diff_examples() {
    let f = parse("1+beta*(p1^2+p2^2)").unwrap();
    assert_eq!(f.diff(&Symbol::P(1)).to_string(), "2*beta*p1");
    let l = parse("q1*p2-q2*p1").unwrap();
    assert_eq!(l.diff(&Symbol::Q(1)), Expr::p(2));
    assert_eq!(l.diff(&Symbol::Named("beta".into())), Expr::zero());

    let s = parse("sqrt(1+p1^2)").unwrap();
    let ds = s.diff(&Symbol::P(1));
    let closed = parse("p1/sqrt(1+p1^2)").unwrap();
    for k in 0..20 {
        let x = PhasePoint::new(vec![0.0], vec![-2.0 + 0.2 * k as f64]);
        let h = 1e-5;
        let mut xp = x.clone();
        xp.p[0] += h;
        let mut xm = x.clone();
        xm.p[0] -= h;
        let fd = (s.eval(&xp).unwrap() - s.eval(&xm).unwrap()) / (2.0 * h);
        let exact = ds.eval(&x).unwrap();
        assert!((exact - fd).abs() <= 1e-6 * (1.0 + exact.abs()));
        assert!((exact - closed.eval(&x).unwrap()).abs() < 1e-14);
    }
}

#[test]
fn substitute_examples() {
    let e = parse("kappa*l0").unwrap();
    let bindings = BTreeMap::from([(Symbol::named("kappa"), parse("-2*beta").unwrap())]);
    let out = e.substitute(&bindings).simplify();
    assert_eq!(out.to_string(), "-2*beta*l0");

    let kmm = parse("2*beta*(q2*p1 - q1*p2)").unwrap();
    assert_eq!(kmm.substitute(&BTreeMap::new()), kmm);

    let zero_q = BTreeMap::from([(Symbol::Q(1), Expr::zero()), (Symbol::Q(2), Expr::zero())]);
    assert_eq!(kmm.substitute(&zero_q).simplify(), Expr::zero());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = PhasePoint::new(vec![0.0; 3], p).with_param("beta", 0.1);
        assert_eq!(kmm.eval(&x).unwrap(), 0.0);
    }
}

#[test]
fn substitution_is_simultaneous() {
    let e = parse("p1 + 2*p2").unwrap();
    let swap = BTreeMap::from([(Symbol::P(1), Expr::p(2)), (Symbol::P(2), Expr::p(1))]);
    assert_eq!(e.substitute(&swap).to_string(), "p2 + 2*p1");
}

#[test]
fn simplify_identities() {
    let cases = [
        ("0 + p1", "p1"),
        ("p1*1", "p1"),
        ("p1*0 + 3", "3"),
        ("2*(3*p1)", "6*p1"),
        ("p1 - p1", "0"),
        ("(p1^2)^3", "p1^6"),
        ("sqrt(1 + p1^2)^2", "1 + p1^2"),
        ("sqrt(9/4)", "3/2"),
        ("exp(0)", "1"),
        ("--p1", "p1"),
        ("-(2*p1)", "-2*p1"),
        ("p1/1", "p1"),
        ("0/p1", "0"),
    ];
    for (src, want) in cases {
        assert_eq!(parse(src).unwrap().simplify().to_string(), want, "{src}");
    }
}

fn arb_leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-5i64..6).prop_map(Expr::int),
        (-7i64..8, 1i64..5).prop_map(|(n, d)| Expr::rational(n, d)),
        (1usize..4).prop_map(Expr::q),
        (1usize..4).prop_map(Expr::p),
        Just(Expr::named("beta")),
    ]
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    arb_leaf().prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| -a),
            inner.clone().prop_map(Expr::sqrt),
            inner.clone().prop_map(Expr::exp),
            (inner.clone(), -3i64..5).prop_map(|(a, n)| a.powi(n)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner).prop_map(|(a, b)| a / b),
        ]
    })
}

// Expressions that are smooth and finite on the unit box.
fn arb_smooth() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3i64..4).prop_map(Expr::int),
        (1usize..3).prop_map(Expr::q),
        (1usize..3).prop_map(Expr::p),
        Just(Expr::named("beta")),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| -a),
            inner.clone().prop_map(|a| (Expr::one() + a.powi(2)).sqrt()),
            inner.clone().prop_map(|a| (Expr::rational(1, 4) * a).exp()),
            (inner.clone(), 0i64..4).prop_map(|(a, n)| a.powi(n)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner).prop_map(|(a, b)| a / (Expr::int(2) + b.powi(2))),
        ]
    })
}

fn unit_box_point(seed: u64) -> PhasePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    PhasePoint::new(q, p).with_param("beta", 0.37)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_parse_round_trip(e in arb_expr()) {
        let s = e.simplify();
        let printed = s.to_string();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(back.simplify(), s, "printed as {}", printed);
    }

    #[test]
    fn simplify_preserves_value(e in arb_smooth(), seed in 0u64..1000) {
        let x = unit_box_point(seed);
        let a = e.eval(&x).unwrap();
        let b = e.simplify().eval(&x).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn diff_agrees_with_central_difference(e in arb_smooth(), seed in 0u64..100, which in 0usize..4) {
        let v = [Symbol::Q(1), Symbol::Q(2), Symbol::P(1), Symbol::P(2)][which].clone();
        let x = unit_box_point(seed);
        let d = e.diff(&v).eval(&x).unwrap();
        let h = 1e-5;
        let shift = |s: f64| {
            let mut y = x.clone();
            match v {
                Symbol::Q(i) => y.q[i - 1] += s,
                Symbol::P(i) => y.p[i - 1] += s,
                Symbol::Named(_) => unreachable!(),
            }
            e.eval(&y).unwrap()
        };
        let fd = (shift(h) - shift(-h)) / (2.0 * h);
        prop_assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "d={} fd={} e={}", d, fd, e);
    }

    #[test]
    fn diff_is_linear(e1 in arb_smooth(), e2 in arb_smooth(), a in -3i64..4, seed in 0u64..100) {
        let v = Symbol::P(1);
        let x = unit_box_point(seed);
        let combined = (Expr::int(a) * e1.clone() + e2.clone()).diff(&v).eval(&x).unwrap();
        let parts = a as f64 * e1.diff(&v).eval(&x).unwrap() + e2.diff(&v).eval(&x).unwrap();
        prop_assert!((combined - parts).abs() <= 1e-12 * (1.0 + combined.abs().max(parts.abs())));
    }
}
