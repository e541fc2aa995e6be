mod common;

use gconvex::bsde::{solve_mc, solve_pde, McConfig, PayoffSpec, PdeConfig, SolveError};
use gconvex::GeneratorSpec;
use proptest::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const GENERATORS: [&str; 6] = ["0", "y", "abs(z1)", "-abs(z1)", "0.5*y + 2*z1", "max(y, 0) - min(z1, 1)"];
const PAYOFFS: [&str; 5] = ["x", "x*x", "abs(x)", "max(x, 0)", "min(x, 1) + 2"];

fn gen(src: &str) -> GeneratorSpec {
    GeneratorSpec::parse(src, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Comparison: raising the payoff by `c >= 0` never lowers the solution.
    #[test]
    fn monotone_in_payoff(i in 0..GENERATORS.len(), k in 0..PAYOFFS.len(), c in 0.0f64..2.0) {
        let g = gen(GENERATORS[i]);
        let cfg = PdeConfig::with_nx(101);
        let lo = PayoffSpec::parse(PAYOFFS[k]).unwrap();
        let hi = PayoffSpec::parse(&format!("max({}, {}) + {c}", PAYOFFS[k], PAYOFFS[(k + 1) % PAYOFFS.len()])).unwrap();
        let (u1, u2) = (solve_pde(&g, &hi, 1.0, &cfg).unwrap().surface, solve_pde(&g, &lo, 1.0, &cfg).unwrap().surface);
        for k in 0..u1.times.len() {
            for j in u1.trusted_range(k) {
                prop_assert!(u1.values[k][j] >= u2.values[k][j] - 1e-9);
            }
        }
        let last = u1.times.len() - 1;
        for j in 0..u1.grid.n {
            prop_assert_eq!(u1.values[last][j], hi.value(u1.grid.x(j)));
        }
    }

    /// `g = a y + b z`, `phi = x^2`: `u(0, 0) = e^{a T} (b^2 T^2 + T)`.
    #[test]
    fn linear_driver_closed_form(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let g = gen(&format!("{a}*y + {b}*z1"));
        let y0 = solve_pde(&g, &PayoffSpec::parse("x*x").unwrap(), 1.0, &PdeConfig::default()).unwrap().y0;
        let exact = a.exp() * (b * b + 1.0);
        prop_assert!((y0 - exact).abs() <= 1e-3, "{} vs {}", y0, exact);
    }
}

#[test]
fn cross_solver_agreement() {
    for (g, p) in common::SOLVER_CATALOG {
        let (g, payoff) = (gen(g), PayoffSpec::parse(p).unwrap());
        let pde = solve_pde(&g, &payoff, 1.0, &PdeConfig::default()).unwrap().y0;
        let mc = solve_mc(&g, &payoff, 1.0, &McConfig::default()).unwrap();
        let bound = (3.0 * mc.stderr).max(2e-2);
        assert!((pde - mc.y0).abs() <= bound, "{}: pde {pde} mc {} bound {bound}", g.source(), mc.y0);
    }
}

#[test]
fn second_order_convergence() {
    let n = Normal::new(0.0, 1.0).unwrap();
    let cases = [
        ("0.5*y + 2*z1", "x*x", 5.0 * 0.5f64.exp()),
        ("-y + z1", "max(x, 0)", (-1.0f64).exp() * (n.cdf(1.0) + n.pdf(1.0))),
    ];
    for (g, p, exact) in cases {
        let err = |nx| {
            let y0 = solve_pde(&gen(g), &PayoffSpec::parse(p).unwrap(), 1.0, &PdeConfig::with_nx(nx)).unwrap().y0;
            (y0 - exact).abs()
        };
        let (coarse, fine) = (err(201), err(401));
        assert!(coarse / fine >= 3.0, "{g}: {coarse:e} -> {fine:e}");
    }
}

#[test]
fn mc_is_reproducible_across_thread_counts() {
    let g = gen("abs(z1)");
    let payoff = PayoffSpec::parse("x*x").unwrap();
    let cfg = McConfig { paths: 4000, steps: 50, ..McConfig::default() };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| solve_mc(&g, &payoff, 1.0, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.y0.to_bits(), b.y0.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    let other = solve_mc(&g, &payoff, 1.0, &McConfig { seed: 7, ..cfg.clone() }).unwrap();
    assert_ne!(a.y0, other.y0);
}

#[test]
fn oversized_steps_are_rejected() {
    let cfg = PdeConfig { nt: Some(10), ..PdeConfig::default() };
    let err = solve_pde(&gen("0"), &PayoffSpec::parse("x").unwrap(), 1.0, &cfg).unwrap_err();
    assert!(matches!(err, SolveError::StabilityViolation(_)));
}
