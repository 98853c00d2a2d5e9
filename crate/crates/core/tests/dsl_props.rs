use gridlock_core::dsl::{
    grade, parse, pretty, CmpOp, Color, Expr, FsmProgram, Ident, InputDecl, InputType, Machine,
    OutputAssign, Rubric, Signal, Span, StateDef, Transition,
};
use proptest::prelude::*;

fn ident(name: impl Into<String>) -> Ident {
    Ident { name: name.into(), span: Span::default() }
}

fn int_atom(int_inputs: bool) -> BoxedStrategy<Expr> {
    let mut options = vec![(0i64..1000).prop_map(|v| Expr::Int(v, Span::default())).boxed(), Just(Expr::Elapsed(Span::default())).boxed()];
    if int_inputs {
        options.push(Just(Expr::Var(ident("n0"))).boxed());
    }
    proptest::strategy::Union::new(options).boxed()
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Eq),
        Just(CmpOp::Ne),
        Just(CmpOp::Lt),
        Just(CmpOp::Le),
        Just(CmpOp::Gt),
        Just(CmpOp::Ge)
    ]
}

/// Well-typed boolean guard over `car_ns`, `car_ew` and optionally `n0`.
fn guard(int_inputs: bool) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(|b| Expr::Bool(b, Span::default())),
        prop_oneof![Just("car_ns"), Just("car_ew")].prop_map(|n| Expr::Var(ident(n))),
        (cmp_op(), int_atom(int_inputs), int_atom(int_inputs)).prop_map(|(op, l, r)| Expr::Cmp {
            op,
            lhs: Box::new(l),
            rhs: Box::new(r),
            span: Span::default()
        }),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::And(Box::new(l), Box::new(r), Span::default())),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::Or(Box::new(l), Box::new(r), Span::default())),
            inner.prop_map(|e| Expr::Not(Box::new(e), Span::default())),
        ]
    })
}

fn color() -> impl Strategy<Value = Color> {
    prop_oneof![Just(Color::Red), Just(Color::Yellow), Just(Color::Green)]
}

fn program(int_inputs: bool) -> impl Strategy<Value = FsmProgram> {
    (1usize..6).prop_flat_map(move |n| {
        let state = (
            proptest::option::of(color()),
            proptest::option::of(color()),
            proptest::collection::vec((guard(int_inputs), 0..n), 0..4),
        );
        proptest::collection::vec(state, n).prop_map(move |states| {
            let mut inputs = vec![
                InputDecl { name: ident("car_ns"), ty: InputType::Bool },
                InputDecl { name: ident("car_ew"), ty: InputType::Bool },
            ];
            if int_inputs {
                inputs.push(InputDecl { name: ident("n0"), ty: InputType::Int });
            }
            let states = states
                .into_iter()
                .enumerate()
                .map(|(i, (ns, ew, transitions))| StateDef {
                    name: ident(format!("S{i}")),
                    initial: i == 0,
                    outputs: [(Signal::Ns, ns), (Signal::Ew, ew)]
                        .into_iter()
                        .filter_map(|(signal, c)| c.map(|color| OutputAssign { signal, color, span: Span::default() }))
                        .collect(),
                    transitions: transitions
                        .into_iter()
                        .map(|(guard, t)| Transition { guard, target: ident(format!("S{t}")), span: Span::default() })
                        .collect(),
                    span: Span::default(),
                })
                .collect();
            FsmProgram { name: ident("Gen"), inputs, states, span: Span::default() }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn pretty_then_parse_is_identity(p in program(true)) {
        let text = pretty(&p);
        let back = parse(&text).map_err(|d| TestCaseError::fail(format!("{d:?}\n{text}")))?;
        prop_assert_eq!(back.without_spans(), p);
    }

    #[test]
    fn parser_never_panics_on_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse(&text);
    }

    #[test]
    fn parser_never_panics_on_token_soup(words in proptest::collection::vec(
        prop_oneof![
            Just("controller"), Just("input"), Just("state"), Just("initial"), Just("set"), Just("when"),
            Just("{"), Just("}"), Just("("), Just(")"), Just(";"), Just(":"), Just("->"), Just("="),
            Just("=="), Just("<="), Just("and"), Just("not"), Just("elapsed"), Just("ns"), Just("GREEN"),
            Just("C"), Just("x"), Just("7"), Just("bool"), Just("\n"), Just("//"),
        ], 0..60)) {
        let text = words.join(" ");
        match parse(&text) {
            Ok(p) => { let _ = gridlock_core::dsl::check(&p); }
            Err(d) => prop_assert!(!d.is_empty()),
        }
    }

    #[test]
    fn grade_is_in_unit_interval_and_monotone(p in program(false)) {
        let rubric = Rubric::traffic();
        let report = grade(&p, &rubric);
        prop_assert!((0.0..=1.0).contains(&report.score));
        for (i, (_, passed)) in report.checks.iter().enumerate() {
            if !passed {
                let reduced = grade(&p, &rubric.without_check(i));
                prop_assert!(reduced.score >= report.score - 1e-12);
            }
        }
    }

    #[test]
    fn safety_matches_scan_on_generated(p in program(false)) {
        let rubric = Rubric::traffic();
        let report = grade(&p, &rubric);
        let Ok(m) = Machine::compile(&p) else { return Ok(()) };
        let mut bad = false;
        for s in &rubric.scenarios {
            let t = m.simulate(&s.scenario, s.ticks).unwrap();
            bad |= t.rows.iter().any(|r| {
                (r.ns == Color::Green && r.ew != Color::Red) || (r.ew == Color::Green && r.ns != Color::Red)
            });
        }
        prop_assert_eq!(report.has_violation("safety"), bad);
    }

    #[test]
    fn simulation_prefix(p in program(false), t1 in 0usize..60, extra in 0usize..60) {
        let Ok(m) = Machine::compile(&p) else { return Ok(()) };
        let s = &Rubric::traffic().scenarios[2].scenario;
        let a = m.simulate(s, t1).unwrap();
        let b = m.simulate(s, t1 + extra).unwrap();
        prop_assert_eq!(a.len(), t1);
        prop_assert_eq!(&a.rows[..], &b.rows[..t1]);
    }
}
