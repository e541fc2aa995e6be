use gconvex::characterization::{
    default_lambdas, jensen_all_convex_predictor, periodicity_test, self_financing_test, super_homogeneity_test,
    translation_invariance_test, zero_interest_test, Relation,
};
use gconvex::convexity::{check_shape, Decision, Mode, Scan};
use gconvex::{GeneratorSpec, ScalarFunction};
use proptest::prelude::*;

const CATALOG: [&str; 10] = [
    "0",
    "y",
    "-y",
    "abs(z1)",
    "-abs(z1)",
    "2*z1",
    "0.5*y + 2*z1",
    "abs(z1) + 1",
    "max(y, 0) - min(z1, 1)",
    "t*y + abs(z1 - 1)",
];

const CONVEX: [&str; 6] = ["y*y", "abs(y)", "max(y, 0)", "-y", "y*y*y*y", "max(y*y, 2*y + 3)"];

fn gen(src: &str) -> GeneratorSpec {
    GeneratorSpec::parse(src, 1).unwrap()
}

#[test]
fn flag_and_membership_routes_agree() {
    let scan = Scan::default_for(1.0, 1);
    for src in CATALOG {
        let g = gen(src);
        let f = g.flags();
        assert_eq!(self_financing_test(&g, &scan).unwrap().verdict, f.zero_at_origin, "{src}");
        assert_eq!(zero_interest_test(&g, &scan).unwrap().verdict, f.zero_on_y_axis, "{src}");
        assert_eq!(translation_invariance_test(&g, &scan).unwrap().verdict, f.independent_of_y, "{src}");
    }
}

#[test]
fn predictor_matches_catalog_verdicts() {
    let scan = Scan::default_for(1.0, 1);
    for src in CATALOG {
        let g = gen(src);
        let verdicts: Vec<_> = CONVEX
            .iter()
            .map(|h| check_shape(&g, &ScalarFunction::parse(h).unwrap(), Mode::Convex, &scan).unwrap())
            .collect();
        if jensen_all_convex_predictor(&g, &scan).unwrap() {
            assert!(verdicts.iter().all(|v| v.decision == Decision::GConvex), "{src}");
        } else if g.flags().independent_of_y {
            assert!(verdicts.iter().any(|v| v.decision == Decision::Neither && v.certificate), "{src}");
        }
    }
}

#[test]
fn shift_relations() {
    let scan = Scan::default_for(1.0, 1);
    let cases = [("abs(z1)", Relation::Equal), ("y", Relation::Ge), ("-y", Relation::Le), ("max(y, 0)", Relation::Ge)];
    for (src, want) in cases {
        assert_eq!(periodicity_test(&gen(src), 1.0, &scan).unwrap().relation, Some(want), "{src}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// `c |z| + b z` with `c >= 0` is super-homogeneous; with `c < 0` it is not.
    #[test]
    fn sublinear_z_generators(c in -2i32..=2, b in -2i32..=2) {
        let g = gen(&format!("{c}*abs(z1) + {b}*z1"));
        let scan = Scan::default_for(1.0, 1).with_z(-5.0, 5.0, 11);
        let r = super_homogeneity_test(&g, &default_lambdas(), &scan).unwrap();
        prop_assert_eq!(r.verdict, c >= 0);
        if !r.verdict {
            let w = r.witness.unwrap();
            prop_assert!(w.lambda.unwrap() < 0.0);
        }
    }
}
