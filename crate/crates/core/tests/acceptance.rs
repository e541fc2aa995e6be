//! Acceptance battery: one line per criterion, nonzero exit when any fails.

mod common;

use std::f64::consts::E;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gconvex::bsde::{conditional_g_expectation_path, solve_mc, solve_pde, McConfig, PayoffSpec, PdeConfig};
use gconvex::characterization::jensen_all_convex_predictor;
use gconvex::convexity::{
    check_shape, g_convex_envelope, l_g_operator, pi_a_membership, AffinePair, Decision, Method, Mode, Scan, YGrid,
    TAU_SYMBOLIC,
};
use gconvex::lab::{
    axiom_suite, catalog, classify_process, default_times, run_batch, smoothed_abs_sequence, stability_suite,
    tol_solver, verify_jensen, ProcessClass, Scenario,
};
use gconvex::{GeneratorSpec, ScalarFunction};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

type Outcome = Result<String, String>;

fn gen(src: &str) -> GeneratorSpec {
    GeneratorSpec::parse(src, 1).unwrap()
}

fn h(src: &str) -> ScalarFunction {
    ScalarFunction::parse(src).unwrap()
}

fn payoff(src: &str) -> PayoffSpec {
    PayoffSpec::parse(src).unwrap()
}

fn scan() -> Scan {
    Scan::default_for(1.0, 1)
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn pde_y0(g: &str, p: &str, nx: usize) -> f64 {
    solve_pde(&gen(g), &payoff(p), 1.0, &PdeConfig::with_nx(nx)).unwrap().y0
}

fn c1_constant_interest() -> Outcome {
    let start = Instant::now();
    let r = solve_pde(&gen("y"), &payoff("1"), 1.0, &PdeConfig::default()).map_err(|e| e.to_string())?;
    let half = r.surface.trusted_value_at(0.5, 0.0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (e0, e1) = ((r.y0 - E).abs(), (half - E.sqrt()).abs());
    ensure(
        e0 <= 1e-3 && e1 <= 1e-3 && elapsed < Duration::from_secs(5),
        format!("y0={:.6} (err {e0:.1e}), u(0.5)={half:.6} (err {e1:.1e}), {:.2}s", r.y0, elapsed.as_secs_f64()),
    )
}

fn c2_jensen_counterexample() -> Outcome {
    let sc = Scenario::parse("c2", "y", "1", "y*y", 1.0).unwrap();
    let r = verify_jensen(&sc).map_err(|e| e.to_string())?;
    let want = E - E * E;
    let gap = r.rows[0].gap;
    let g = gen("y");
    let v = check_shape(&g, &h("y*y"), Mode::Convex, &scan()).unwrap();
    let at_point = l_g_operator(&g, &h("y*y"), 0.0, 1.0, &[0.0]).unwrap();
    let local = scan().with_y(0.0, 1.0, 2).with_z(-1.0, 1.0, 3);
    let lv = check_shape(&g, &h("y*y"), Mode::Convex, &local).unwrap();
    ensure(
        (gap - want).abs() <= 5e-3
            && !r.holds
            && v.decision == Decision::Neither
            && at_point == -1.0
            && lv.min_margin == -1.0
            && lv.witness.y == 1.0
            && lv.witness.z == vec![0.0],
        format!(
            "gap={gap:.4} (want {want:.4}), verdict {}, L_g(1,0)={at_point}, local witness (y={}, z={:?}) margin {}",
            r.verdict(),
            lv.witness.y,
            lv.witness.z,
            lv.min_margin
        ),
    )
}

fn c3_abs_z_closed_forms() -> Outcome {
    let g = gen("abs(z1)");
    let mut parts = Vec::new();
    let mut ok = true;
    for p in ["x", "-x"] {
        let pde = solve_pde(&g, &payoff(p), 1.0, &PdeConfig::default()).unwrap().y0;
        let mc = solve_mc(&g, &payoff(p), 1.0, &McConfig::default()).unwrap();
        ok &= (pde - 1.0).abs() <= 1e-3 && (mc.y0 - 1.0).abs() <= 3.0 * mc.stderr;
        parts.push(format!("E[{p}]: pde {pde:.5}, mc {:.4}±{:.4}", mc.y0, mc.stderr));
    }
    let neg = h("-y");
    let convex = check_shape(&g, &neg, Mode::Convex, &scan()).unwrap().decision;
    let concave = check_shape(&g, &neg, Mode::Concave, &scan()).unwrap().decision;
    ok &= convex == Decision::GConvex && concave == Decision::Neither;
    parts.push(format!("-y: convex mode {convex:?}, concave mode {concave:?}, -1.0 < 1.0"));
    ensure(ok, parts.join("; "))
}

fn c4_abs_z_battery() -> Outcome {
    let g = gen("abs(z1)");
    let sq = check_shape(&g, &h("y*y"), Mode::Convex, &scan()).unwrap();
    let ab = check_shape(&g, &h("abs(y)"), Mode::Convex, &scan()).unwrap();
    let nsq = check_shape(&g, &h("-y*y"), Mode::Concave, &scan()).unwrap();
    let neg = check_shape(&gen("-abs(z1)"), &h("abs(y)"), Mode::Convex, &scan()).unwrap();
    ensure(
        sq.decision == Decision::GConvex
            && sq.min_margin == 0.0
            && ab.decision == Decision::GConvex
            && ab.scan.method == Method::Nonsmooth
            && nsq.decision == Decision::Neither
            && nsq.witness.y > 0.0
            && neg.decision == Decision::Neither
            && neg.witness.y < 0.0,
        format!(
            "y^2 {:?} (min {}), |y| {:?} via {:?}, -y^2 concave-mode {:?} at y={}, |y| under -|z| {:?} at y={}",
            sq.decision, sq.min_margin, ab.decision, ab.scan.method, nsq.decision, nsq.witness.y, neg.decision, neg.witness.y
        ),
    )
}

const CONVEX_CATALOG: [&str; 6] = ["y*y", "abs(y)", "max(y, 0)", "-y", "y*y*y*y", "max(y*y, 2*y + 3)"];

fn c5_characterization() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (src, want) in [("abs(z1)", true), ("2*z1", true), ("y", false), ("-abs(z1)", false)] {
        let g = gen(src);
        let pred = jensen_all_convex_predictor(&g, &scan()).unwrap();
        let verdicts: Vec<_> =
            CONVEX_CATALOG.iter().map(|f| check_shape(&g, &h(f), Mode::Convex, &scan()).unwrap()).collect();
        let all = verdicts.iter().all(|v| v.decision == Decision::GConvex);
        let some_witness = verdicts.iter().any(|v| v.decision == Decision::Neither && v.certificate);
        ok &= pred == want && if want { all } else { some_witness };
        let failing = verdicts.iter().filter(|v| v.decision == Decision::Neither).count();
        parts.push(format!("{src}: predictor {pred}, {failing}/6 with witness"));
    }
    ensure(ok, parts.join("; "))
}

fn c6_affine_sets() -> Outcome {
    let g = gen("abs(z1)");
    let m = |a, b| pi_a_membership(&g, AffinePair::new(a, b), &scan()).unwrap().member;
    let (m23, m10, mneg) = (m(2.0, 3.0), m(1.0, 0.0), m(-1.0, 0.0));
    let lhs = pde_y0("abs(z1)", "2*x + 3", 401);
    let rhs = 2.0 * pde_y0("abs(z1)", "x", 401) + 3.0;
    ensure(
        m23 && m10 && !mneg && (lhs - rhs).abs() <= 2e-3,
        format!("(2,3):{m23} (1,0):{m10} (-1,0):{mneg}; E[2X+3]={lhs:.6}, 2E[X]+3={rhs:.6}"),
    )
}

/// Lower convex hull of `(xs, ys)` by the monotone chain, evaluated on `xs`.
fn lower_hull(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for (&x, &y) in xs.iter().zip(ys) {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, y));
    }
    xs.iter()
        .map(|&x| {
            let k = hull.windows(2).position(|w| x <= w[1].0).unwrap_or(hull.len() - 2);
            let (a, b) = (hull[k], hull[k + 1]);
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        })
        .collect()
}

fn c7_envelope() -> Outcome {
    let s = scan();
    let grid = YGrid::for_scan(&s);
    let ys = grid.points();
    let phi = h("min(abs(y - 1), abs(y + 1))");
    let env = g_convex_envelope(&gen("abs(z1)"), &phi, &grid, None, &s).unwrap();
    let oracle = lower_hull(&ys, &ys.iter().map(|&y| phi.value(y)).collect::<Vec<_>>());
    let sup = env.function.values().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let zero = g_convex_envelope(&gen("y"), &h("y*y"), &grid, None, &s).unwrap();
    let zmax = zero.function.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
    ensure(
        sup <= 2.0 * grid.step() && zmax <= TAU_SYMBOLIC,
        format!("W-shape sup|env - hull| = {sup:.2e} (bound {:.3}); g=y envelope of y^2 max |f| = {zmax:.1e}", 2.0 * grid.step()),
    )
}

fn c8_axioms() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for src in ["0", "y", "abs(z1)", "0.5*y + 2*z1"] {
        match axiom_suite(&gen(src), &PdeConfig::default()) {
            Ok(r) => parts.push(format!("{src}: {} checks pass", r.checks.len())),
            Err(e) => {
                ok = false;
                parts.push(format!("{src}: {e}"));
            }
        }
    }
    let chain = conditional_g_expectation_path(&gen("y"), &payoff("1"), 1.0, &[0.5], &PdeConfig::default()).unwrap();
    ok &= (chain.y0 - E).abs() <= 2e-3;
    parts.push(format!("tower y0={:.6}", chain.y0));
    ensure(ok, parts.join("; "))
}

fn c9_viability() -> Outcome {
    let records = run_batch(&catalog()).map_err(|e| e.to_string())?;
    let agree = records.iter().filter(|r| r.verdicts_agree).count();
    let failing_y = records.iter().any(|r| r.jensen.gen == "y" && !r.jensen.holds && !r.viable);
    ensure(
        agree == records.len() && failing_y,
        format!("{agree}/{} catalog scenarios agree; linear-y failure reproduced: {failing_y}", records.len()),
    )
}

fn c10_transforms() -> Outcome {
    let g = gen("abs(z1)");
    let base = solve_pde(&g, &payoff("x"), 1.0, &PdeConfig::default()).unwrap();
    let tol = tol_solver(base.diagnostics.dx);
    let times = default_times(1.0);
    let sq = h("y*y");
    let sub = classify_process(&g, &base.surface.map(|y| sq.value(y)), &times, tol).map_err(|e| e.to_string())?;
    let mart = classify_process(&g, &base.surface, &times, tol).map_err(|e| e.to_string())?;
    ensure(
        sub.class == ProcessClass::GSubmartingale && mart.class == ProcessClass::GMartingale,
        format!("Y^2 {:?}, Y {:?}", sub.class, mart.class),
    )
}

fn c11_cross_solver_and_convergence() -> Outcome {
    let mut ok = true;
    let mut worst = (0.0, "");
    for (g, p) in common::SOLVER_CATALOG {
        let pde = pde_y0(g, p, 401);
        let mc = solve_mc(&gen(g), &payoff(p), 1.0, &McConfig::default()).unwrap();
        let (d, bound) = ((pde - mc.y0).abs(), (3.0 * mc.stderr).max(2e-2));
        ok &= d <= bound;
        if d / bound > worst.0 {
            worst = (d / bound, g);
        }
    }
    let quad = 5.0 * 0.5f64.exp();
    let n = Normal::new(0.0, 1.0).unwrap();
    let call = (-1.0f64).exp() * (n.cdf(1.0) + n.pdf(1.0));
    let mut ratios = Vec::new();
    for (g, p, exact) in [("0.5*y + 2*z1", "x*x", quad), ("-y + z1", "max(x, 0)", call)] {
        let (e1, e2) = ((pde_y0(g, p, 201) - exact).abs(), (pde_y0(g, p, 401) - exact).abs());
        ratios.push(e1 / e2);
        ok &= e1 / e2 >= 3.0;
    }
    ensure(
        ok,
        format!("10 scenarios, worst |Δ|/bound {:.2} ({}); error ratios {:.2}, {:.2}", worst.0, worst.1, ratios[0], ratios[1]),
    )
}

fn c12_stability() -> Outcome {
    let ks = [1, 4, 16, 64];
    let seq = smoothed_abs_sequence(&ks, -6.0, 6.0, 1201).unwrap();
    let limit = ScalarFunction::tabulate_fn(-6.0, 6.0, 1201, f64::abs).unwrap();
    let r = stability_suite(&gen("abs(z1)"), &seq, &limit, &scan()).map_err(|e| e.to_string())?;
    let bounded = r.distances.iter().zip(ks).all(|(d, k)| *d <= f64::from(k).powf(-0.5) + 1e-12);
    ensure(
        r.shared_verdict && r.monotone && bounded,
        format!("verdicts {:?}, limit {:?}, distances {:?}", r.verdicts, r.limit, r.distances),
    )
}

fn main() {
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().expect("single-thread pool");
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("constant under linear-y generator", c1_constant_interest),
        ("Jensen counterexample under linear-y generator", c2_jensen_counterexample),
        ("closed forms under |z|", c3_abs_z_closed_forms),
        ("shape battery under |z|", c4_abs_z_battery),
        ("characterization coherence", c5_characterization),
        ("affine sets", c6_affine_sets),
        ("envelope vs hull oracle", c7_envelope),
        ("axiom suite", c8_axioms),
        ("viability equivalence", c9_viability),
        ("martingale transforms", c10_transforms),
        ("cross-solver and convergence", c11_cross_solver_and_convergence),
        ("stability suite", c12_stability),
    ];
    let start = Instant::now();
    let mut outcomes: Vec<Outcome> = criteria
        .iter()
        .map(|(_, f)| catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into())))
        .collect();
    let total = start.elapsed();
    outcomes[9] = outcomes[9].clone().and_then(|m| {
        ensure(total < Duration::from_secs(180), format!("{m}; battery {:.1}s single-threaded", total.as_secs_f64()))
    });
    let mut failed = 0;
    for (i, ((name, _), outcome)) in criteria.iter().zip(&outcomes).enumerate() {
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("[{tag}] {:>2} {name}: {msg}", i + 1);
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
