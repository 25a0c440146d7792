//! Parser, printer and evaluator tests, including the parse-print-parse
//! identity and a finite-difference cross-check of jet evaluation.

use super::*;
use crate::jet::Jet;
use proptest::prelude::*;

fn ctx2() -> ExprContext {
    ExprContext::chart(&["u1".to_string(), "u2".to_string()])
}

fn parse2(src: &str) -> FieldExpr {
    FieldExpr::parse(src, &ctx2()).unwrap()
}

#[test]
fn precedence_pow_over_neg_over_mul_over_add() {
    // -u1^2 parses as -(u1^2)
    let e = parse2("-u1^2");
    assert_eq!(
        e.node(),
        &Node::Neg(Box::new(Node::Pow(
            Box::new(Node::Coord(0)),
            Rational::integer(2)
        )))
    );
    let v = e.eval_f64(&[3.0, 0.0], None, &Default::default()).unwrap();
    assert_eq!(v, -9.0);

    // 1 + 2*u1^2 groups as 1 + (2*(u1^2))
    let e = parse2("1 + 2*u1^2");
    let v = e.eval_f64(&[3.0, 0.0], None, &Default::default()).unwrap();
    assert_eq!(v, 19.0);

    // left associativity of - and /
    let e = parse2("8 - 3 - 2");
    assert_eq!(e.eval_f64(&[0.0, 0.0], None, &Default::default()).unwrap(), 3.0);
    let e = parse2("8/4/2");
    assert_eq!(e.eval_f64(&[0.0, 0.0], None, &Default::default()).unwrap(), 1.0);
}

#[test]
fn rational_exponents() {
    let e = parse2("u1^(3/2)");
    let v = e.eval_f64(&[4.0, 0.0], None, &Default::default()).unwrap();
    assert_eq!(v, 8.0);
    let e = parse2("u1^-2");
    let v = e.eval_f64(&[2.0, 0.0], None, &Default::default()).unwrap();
    assert_eq!(v, 0.25);
    let e = parse2("u1^0.5");
    let v = e.eval_f64(&[9.0, 0.0], None, &Default::default()).unwrap();
    assert_eq!(v, 3.0);
    // decimal exponents resolve to their smallest-denominator reading
    let e = parse2("u1^0.1");
    assert_eq!(e.node(), parse2("u1^(1/10)").node());
    // no small-denominator reading -> parse error
    assert!(FieldExpr::parse("u1^3.141592653589793", &ctx2()).is_err());
    // bare a/b after ^ keeps standard precedence: (u1^3)/2
    let e = parse2("u1^3/2");
    assert_eq!(e.eval_f64(&[2.0, 0.0], None, &Default::default()).unwrap(), 4.0);
    // chained ^ is rejected
    assert!(FieldExpr::parse("u1^2^3", &ctx2()).is_err());
}

#[test]
fn unknown_identifier_carries_position() {
    let err = FieldExpr::parse("u1 + \nw2", &ctx2()).unwrap_err();
    match err {
        Error::UnknownIdentifier { name, line, column } => {
            assert_eq!(name, "w2");
            assert_eq!(line, 2);
            assert_eq!(column, 1);
        }
        other => panic!("expected UnknownIdentifier, got {other:?}"),
    }
}

#[test]
fn lax_variable_requires_scope() {
    assert!(FieldExpr::parse("p + u1", &ctx2()).is_err());
    let ctx = ExprContext::chart_with_lax(&["u1".to_string(), "u2".to_string()]);
    let e = FieldExpr::parse("p + u1/(p - u2)", &ctx).unwrap();
    let v = e
        .eval_f64(&[0.25, 0.0], Some(2.0), &Default::default())
        .unwrap();
    assert_eq!(v, 2.0 + 0.125);
}

#[test]
fn division_by_zero_is_an_error_not_nan() {
    let e = parse2("1/(u1 - 1)");
    let err = e.eval_f64(&[1.0, 0.0], None, &Default::default()).unwrap_err();
    assert!(matches!(err, Error::Domain { .. }));
    let env = JetEnv::chart(&[1.0, 0.0], 2);
    assert!(e.eval_jet(&env).is_err());
}

#[test]
fn domain_error_names_offending_subexpression() {
    let e = parse2("u2 + ln(u1 - 2)");
    let err = e.eval_f64(&[1.0, 0.0], None, &Default::default()).unwrap_err();
    let msg = format!("{err}");
    assert!(msg.contains("ln"), "message should name the function: {msg}");
}

#[test]
fn jet_eval_matches_finite_differences() {
    // Mixed elementary functions; compare first and second partials against
    // central differences.
    let ctx = ExprContext::chart(&["u1".to_string(), "u2".to_string()]);
    let e = FieldExpr::parse("exp(u1*u2) + sin(u1)/(2 + cos(u2)) + u1^(3/2)", &ctx).unwrap();
    let x = [1.3, 0.7];
    let env = JetEnv::chart(&x, 2);
    let jet = e.eval_jet(&env).unwrap();
    let f = |p: &[f64]| e.eval_f64(p, None, &Default::default()).unwrap();

    let h = 1e-5;
    for i in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[i] += h;
        xm[i] -= h;
        let fd = (f(&xp) - f(&xm)) / (2.0 * h);
        assert!(
            (jet.d1(i) - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
            "d1({i}): jet {} vs fd {}",
            jet.d1(i),
            fd
        );
    }
    // second partial d^2/du1 du2
    let ff = |a: f64, b: f64| f(&[a, b]);
    let fd2 = (ff(x[0] + h, x[1] + h) - ff(x[0] + h, x[1] - h) - ff(x[0] - h, x[1] + h)
        + ff(x[0] - h, x[1] - h))
        / (4.0 * h * h);
    assert!(
        (jet.d2(0, 1) - fd2).abs() <= 1e-4 * (1.0 + fd2.abs()),
        "d2: jet {} vs fd {}",
        jet.d2(0, 1),
        fd2
    );
}

#[test]
fn jet_value_equals_plain_eval() {
    let ctx = ExprContext::chart_with_lax(&["u1".to_string(), "u2".to_string()]);
    let e = FieldExpr::parse("p + u1/(p - u2)", &ctx).unwrap();
    let env = JetEnv::joint(2.0, &[0.25, 0.0], 3);
    let jet = e.eval_jet(&env).unwrap();
    let plain = e
        .eval_f64(&[0.25, 0.0], Some(2.0), &Default::default())
        .unwrap();
    assert_eq!(jet.value(), plain);
    // d/dp of p + u1/(p-u2) = 1 - u1/(p-u2)^2 = 1 - 0.25/4
    assert!((jet.d1(0) - (1.0 - 0.0625)).abs() < 1e-14);
}

#[test]
fn parameters_resolve_from_environment() {
    let ctx = ExprContext {
        coords: vec!["u1".into()],
        params: vec!["kappa".into()],
        allow_lax_var: false,
    };
    let e = FieldExpr::parse("kappa*u1", &ctx).unwrap();
    let mut params = std::collections::HashMap::new();
    params.insert("kappa".to_string(), 3.0);
    assert_eq!(e.eval_f64(&[2.0], None, &params).unwrap(), 6.0);
    assert!(e.eval_f64(&[2.0], None, &Default::default()).is_err());
}

#[test]
fn fixed_lax_env_treats_p_as_constant() {
    let ctx = ExprContext::chart_with_lax(&["u1".to_string()]);
    let e = FieldExpr::parse("p*u1", &ctx).unwrap();
    let env = JetEnv::chart_with_fixed_lax(&[3.0], 5.0, 1);
    let jet = e.eval_jet(&env).unwrap();
    assert_eq!(jet.value(), 15.0);
    assert_eq!(jet.d1(0), 5.0); // d/du1 (p*u1) with p fixed
}

// --- parse -> print -> parse identity -------------------------------------

fn arb_node(depth: u32) -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        (0.0..100.0f64).prop_map(|v| Node::Const((v * 16.0).round() / 16.0)),
        (0usize..2).prop_map(Node::Coord),
        Just(Node::LaxVar),
    ];
    leaf.prop_recursive(depth, 64, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
            (inner.clone(), inner.clone(), prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div)
            ])
                .prop_map(|(a, b, op)| Node::Bin(op, Box::new(a), Box::new(b))),
            (inner.clone(), -4i64..=4, 1i64..=3)
                .prop_map(|(a, n, d)| Node::Pow(Box::new(a), Rational::new(n, d))),
            (inner, prop_oneof![
                Just(UnaryFn::Exp),
                Just(UnaryFn::Ln),
                Just(UnaryFn::Sqrt),
                Just(UnaryFn::Sin),
                Just(UnaryFn::Cos)
            ])
                .prop_map(|(a, f)| Node::Unary(f, Box::new(a))),
        ]
    })
}

proptest! {
    #[test]
    fn parse_print_parse_is_identity(root in arb_node(5)) {
        let ctx = ExprContext::chart_with_lax(&["u1".to_string(), "u2".to_string()]);
        let expr = FieldExpr::from_node_named(root, &ctx.coords);
        let reparsed = FieldExpr::parse(expr.text(), &ctx).unwrap();
        prop_assert_eq!(reparsed.node(), expr.node());
        prop_assert_eq!(reparsed.text(), expr.text());
    }
}

proptest! {
    #[test]
    fn jet_first_derivatives_match_finite_differences(
        a in -0.9..0.9f64,
        b in -0.9..0.9f64,
    ) {
        let ctx = ExprContext::chart(&["u1".to_string(), "u2".to_string()]);
        let e = FieldExpr::parse("exp(u1) + u1*u2 + cos(u2)*u1^2", &ctx).unwrap();
        let x = [a, b];
        let env = JetEnv::chart(&x, 1);
        let jet = e.eval_jet(&env).unwrap();
        let f = |p: &[f64]| e.eval_f64(p, None, &Default::default()).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x; xp[i] += h;
            let mut xm = x; xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0*h);
            prop_assert!((jet.d1(i) - fd).abs() <= 1e-5*(1.0 + fd.abs()));
        }
    }
}

#[test]
fn canonical_text_is_stable() {
    let e = parse2("(u1 + u2)*(u1 - u2)/(1 + u1^2)");
    assert_eq!(e.text(), "(u1 + u2)*(u1 - u2)/(1 + u1^2)");
    let e = parse2("-(u1*u2)");
    assert_eq!(e.text(), "-(u1*u2)");
    let e = parse2("u1 ^ ( - 3 / 2 )");
    assert_eq!(e.text(), "u1^(-3/2)");
}

#[test]
fn jet_env_shapes_are_consistent() {
    // joint env: axis 0 is p, axes 1.. are coordinates
    let env = JetEnv::joint(1.5, &[2.0, 3.0], 2);
    assert_eq!(env.dim, 3);
    let p = env.lax.as_ref().unwrap();
    assert_eq!(p.value(), 1.5);
    assert_eq!(p.d1(0), 1.0);
    assert_eq!(env.coords[1].d1(2), 1.0);
    let _ = Jet::constant(3, 2, 0.0);
}
