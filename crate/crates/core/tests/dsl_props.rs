use gconvex::dsl::{estimate_lipschitz, parse_expr, Expr, GeneratorExpr, GeneratorSpec, ValidationDomain, VarSet};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..1e3).prop_map(Expr::Num),
        (0u32..20).prop_map(|k| Expr::Num(f64::from(k) / 4.0)),
        Just(Expr::T),
        Just(Expr::Y),
        (0usize..3).prop_map(Expr::Z),
        Just(Expr::NormZ),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(6, 64, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |a| Expr::Neg(b(a))),
            inner.clone().prop_map(move |a| Expr::Abs(b(a))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Add(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Sub(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Mul(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Div(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Max(b(x), b(y))),
            (inner.clone(), inner).prop_map(move |(x, y)| Expr::Min(b(x), b(y))),
        ]
    })
}

/// Piecewise-linear expressions in `y` and `z1`: sums, negations, integer
/// multiples, `abs`, `max`, `min`.
fn piecewise_linear() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4i32..=4).prop_map(|k| Expr::constant(f64::from(k) / 2.0)),
        Just(Expr::Y),
        Just(Expr::Z(0)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |a| Expr::Abs(b(a))),
            inner.clone().prop_map(move |a| Expr::Neg(b(a))),
            ((-3i32..=3), inner.clone()).prop_map(move |(k, a)| Expr::Mul(b(Expr::constant(f64::from(k))), b(a))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Add(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Max(b(x), b(y))),
            (inner.clone(), inner).prop_map(move |(x, y)| Expr::Min(b(x), b(y))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_trees_parse_back(e in tree()) {
        let printed = e.to_string();
        let back = parse_expr(&printed, VarSet::Generator { dim_z: 3 }).unwrap();
        prop_assert_eq!(back, e, "{}", printed);
    }

    #[test]
    fn zero_on_axis_implies_zero_at_origin(e in piecewise_linear()) {
        let spec = GeneratorSpec::new(GeneratorExpr::new(e, 1).unwrap(), ValidationDomain::default()).unwrap();
        let f = spec.flags();
        prop_assert!(!f.zero_on_y_axis || f.zero_at_origin);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lipschitz_estimate_stabilizes(e in piecewise_linear()) {
        let g = GeneratorExpr::new(e.clone(), 1).unwrap();
        let base = ValidationDomain::default();
        let a = estimate_lipschitz(&g, &base.with_points(201)).unwrap().mu_hat;
        let b = estimate_lipschitz(&g, &base.with_points(401)).unwrap().mu_hat;
        if b > 0.0 {
            prop_assert!((a / b - 1.0).abs() <= 0.01, "{}: {} vs {}", e, a, b);
        } else {
            prop_assert_eq!(a, 0.0);
        }
    }
}

#[test]
fn literal_sign_convention() {
    let e = parse_expr("-3 + y", VarSet::Scalar).unwrap();
    assert_eq!(e, Expr::Add(Box::new(Expr::constant(-3.0)), Box::new(Expr::Y)));
}
