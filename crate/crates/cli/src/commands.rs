use std::fmt::Display;
use std::path::Path;

use gconvex::bsde::{solve_mc, solve_pde, McConfig, PayoffSpec, PdeConfig, SolveResult};
use gconvex::characterization::{
    default_lambdas, jensen_all_convex_predictor, periodicity_test, self_financing_test, super_homogeneity_test,
    translation_invariance_test, zero_interest_test, CharacterizationReport,
};
use gconvex::convexity::{check_nonsmooth, check_shape, g_convex_envelope, Mode, Scan, YGrid};
use gconvex::lab::{catalog, parse_batch, run_batch, LabError, ScenarioEntry};
use gconvex::{GeneratorSpec, ScalarFunction, TabulatedFunction};
use serde_json::{json, Value};

use crate::output::{Cell, Table};
use crate::{CheckArgs, ClassifyArgs, DecisionArg, EnvelopeArgs, MethodArg, ModeArg, Outcome, ScanArgs, SolveArgs, SuiteArgs};

fn input(e: impl Display) -> crate::CliError {
    crate::CliError::Input(e.to_string())
}

fn to_json(v: &impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn scan_from(args: &ScanArgs) -> Result<Scan, crate::CliError> {
    if !(args.horizon > 0.0 && args.horizon.is_finite()) {
        return Err(input(format!("horizon must be positive, got {}", args.horizon)));
    }
    let mut scan = Scan::default_for(args.horizon, args.dim);
    if let Some((lo, hi, n)) = args.y_range {
        scan = scan.with_y(lo, hi, n);
    }
    if let Some((lo, hi, n)) = args.z_range {
        scan = scan.with_z(lo, hi, n);
    }
    scan.validate().map_err(input)?;
    Ok(scan)
}

fn read(path: &Path) -> Result<String, crate::CliError> {
    std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

/// `y,value` rows; a non-numeric first line is taken as a header.
fn read_table(path: &Path) -> Result<ScalarFunction, crate::CliError> {
    let text = read(path)?;
    let (mut ys, mut vs) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parsed: Option<(f64, f64)> = line
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        match parsed {
            Some((y, v)) => {
                ys.push(y);
                vs.push(v);
            }
            None if i == 0 => {}
            None => return Err(input(format!("{}:{}: expected 'y,value'", path.display(), i + 1))),
        }
    }
    Ok(ScalarFunction::Tabulated(TabulatedFunction::from_points(&ys, vs).map_err(input)?))
}

pub fn check(args: &CheckArgs) -> Result<Outcome, crate::CliError> {
    let gen = GeneratorSpec::parse(&args.gen, args.scan.dim).map_err(input)?;
    let (h, h_label) = match (&args.h, &args.h_table) {
        (Some(src), _) => (ScalarFunction::parse(src).map_err(input)?, src.clone()),
        (None, Some(path)) => (read_table(path)?, path.display().to_string()),
        (None, None) => return Err(input("one of --h or --h-table is required")),
    };
    let scan = scan_from(&args.scan)?;
    let mode = match args.mode {
        ModeArg::Convex => Mode::Convex,
        ModeArg::Concave => Mode::Concave,
        ModeArg::Affine => Mode::Affine,
    };
    let v = check_shape(&gen, &h, mode, &scan).map_err(input)?;
    let decision = v.decision.to_string();
    let expect = args.expect.map(|e| {
        match e {
            DecisionArg::GConvex => "g_convex",
            DecisionArg::GConcave => "g_concave",
            DecisionArg::GAffine => "g_affine",
            DecisionArg::Neither => "neither",
        }
        .to_string()
    });
    let ok = expect.as_ref().is_none_or(|e| *e == decision);
    let summary = json!({
        "command": "check",
        "gen": gen.source(),
        "h": h_label,
        "mode": v.mode,
        "decision": decision,
        "label": v.label(),
        "min_margin": v.min_margin,
        "max_margin": v.max_margin,
        "witness": v.witness,
        "method": v.scan.method,
        "expect": expect,
        "matched": ok,
    });
    let mut full = summary.clone();
    full["verdict"] = to_json(&v);
    let mut table = Table::new(&["decision", "mode", "min_margin", "max_margin", "witness_t", "witness_y", "witness_z", "certificate"]);
    let z = v.witness.z.iter().map(|z| z.to_string()).collect::<Vec<_>>().join(" ");
    table.push(vec![
        decision.into(),
        format!("{:?}", v.mode).to_lowercase().into(),
        v.min_margin.into(),
        v.max_margin.into(),
        v.witness.t.into(),
        v.witness.y.into(),
        z.into(),
        v.certificate.into(),
    ]);
    Ok(Outcome { summary, full, table, ok })
}

/// Every `stride`-th time row of the surface plus the last one.
fn surface_table(res: &SolveResult, rows: usize) -> Table {
    let s = &res.surface;
    let n = s.times.len();
    let stride = n.div_ceil(rows.max(1)).max(1);
    let mut table = Table::new(&["t", "x", "u", "z", "trusted"]);
    for k in (0..n).filter(|k| k % stride == 0 || *k == n - 1) {
        let trusted = s.trusted_range(k);
        for j in 0..s.grid.n {
            table.push(vec![
                s.times[k].into(),
                s.grid.x(j).into(),
                s.values[k][j].into(),
                res.z_surface[k][j].into(),
                trusted.contains(&j).into(),
            ]);
        }
    }
    table
}

pub fn solve(args: &SolveArgs, seed: u64) -> Result<Outcome, crate::CliError> {
    let gen = GeneratorSpec::parse(&args.gen, 1).map_err(input)?;
    let payoff = PayoffSpec::parse(&args.payoff).map_err(input)?;
    let mut summary = json!({
        "command": "solve",
        "gen": gen.source(),
        "payoff": args.payoff,
        "T": args.horizon,
        "x0": args.x0,
        "method": format!("{:?}", args.method).to_lowercase(),
    });
    let mut full = summary.clone();
    let mut table = Table::new(&["method", "y0", "stderr"]);
    let mut pde_y0 = None;
    if args.method != MethodArg::Mc {
        let cfg = PdeConfig { nx: args.nx, nt: args.nt, domain: args.domain, x0: args.x0 };
        let res = solve_pde(&gen, &payoff, args.horizon, &cfg).map_err(input)?;
        summary["y0"] = json!(res.y0);
        summary["pde"] = json!({ "y0": res.y0, "nx": res.diagnostics.nx, "nt": res.diagnostics.nt });
        full["pde"] = json!({ "y0": res.y0, "diagnostics": res.diagnostics });
        table = surface_table(&res, args.rows);
        pde_y0 = Some(res.y0);
    }
    if args.method != MethodArg::Pde {
        let cfg = McConfig {
            paths: args.paths,
            steps: args.steps,
            basis_degree: args.degree,
            seed,
            x0: args.x0,
            ..McConfig::default()
        };
        let mc = solve_mc(&gen, &payoff, args.horizon, &cfg).map_err(input)?;
        summary["mc"] = json!({ "y0": mc.y0, "stderr": mc.stderr, "seed": seed });
        full["mc"] = to_json(&mc);
        full["mc"]["seed"] = json!(seed);
        if pde_y0.is_none() {
            summary["y0"] = json!(mc.y0);
            table.push(vec!["mc".into(), mc.y0.into(), mc.stderr.into()]);
        }
        if let Some(p) = pde_y0 {
            let delta = p - mc.y0;
            let bound = (3.0 * mc.stderr).max(2e-2);
            let agree = delta.abs() <= bound;
            let cross = json!({ "delta": delta, "bound": bound, "agree": agree });
            summary["cross_check"] = cross.clone();
            full["cross_check"] = cross;
        }
    }
    let ok = summary["cross_check"]["agree"].as_bool().unwrap_or(true);
    Ok(Outcome { summary, full, table, ok })
}

pub fn suite(args: &SuiteArgs) -> Result<Outcome, crate::CliError> {
    let (source, entries): (String, Vec<ScenarioEntry>) = match &args.batch {
        Some(path) => (path.display().to_string(), parse_batch(&read(path)?).map_err(input)?),
        None => ("bundled catalog".into(), catalog()),
    };
    if entries.is_empty() {
        return Err(input("no scenarios"));
    }
    let records = run_batch(&entries).map_err(|e| match e {
        LabError::AxiomViolated { .. } | LabError::ContradictionDetected(_) | LabError::ViabilityViolated { .. } => {
            crate::CliError::Assertion(e.to_string())
        }
        other => input(other),
    })?;
    let failed: Vec<&str> = records.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect();
    for id in &failed {
        eprintln!("failed: {id}");
    }
    let results: Vec<Value> = records
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "jensen": r.jensen.verdict(),
                "expect": r.expect,
                "min_gap": r.jensen.min_gap,
                "tol": r.jensen.tol,
                "viable": r.viable,
                "passed": r.passed,
            })
        })
        .collect();
    let summary = json!({
        "command": "suite",
        "source": source,
        "scenarios": records.len(),
        "passed": records.len() - failed.len(),
        "failed": failed,
        "results": results,
    });
    let mut full = summary.clone();
    full["records"] = to_json(&records);
    let mut table =
        Table::new(&["id", "jensen", "expect", "min_gap", "tol", "viability_margin", "viable", "verdicts_agree", "passed"]);
    for r in &records {
        let expect = r.expect.map(|e| to_json(&e).as_str().unwrap_or_default().to_string()).unwrap_or_default();
        table.push(vec![
            r.id.clone().into(),
            r.jensen.verdict().into(),
            expect.into(),
            r.jensen.min_gap.into(),
            r.jensen.tol.into(),
            r.viability_margin.into(),
            r.viable.into(),
            r.verdicts_agree.into(),
            r.passed.into(),
        ]);
    }
    let ok = failed.is_empty();
    Ok(Outcome { summary, full, table, ok })
}

pub fn envelope(args: &EnvelopeArgs) -> Result<Outcome, crate::CliError> {
    let gen = GeneratorSpec::parse(&args.gen, args.scan.dim).map_err(input)?;
    let phi = ScalarFunction::parse(&args.phi).map_err(input)?;
    let scan = scan_from(&args.scan)?;
    let (lo, hi, n) = args.grid;
    let grid = YGrid::new(lo, hi, n);
    let slopes = args.slopes.map(|(a, b, k)| YGrid::new(a, b, k));
    let env = g_convex_envelope(&gen, &phi, &grid, slopes.as_ref(), &scan).map_err(input)?;
    let verdict = check_nonsmooth(&gen, &env.function, &scan).map_err(input)?;
    let ys = grid.points();
    let phis: Vec<f64> = ys.iter().map(|&y| phi.value(y)).collect();
    let fs = env.function.values();
    let max_gap = fs.iter().zip(&phis).map(|(f, p)| p - f).fold(0.0, f64::max);
    let summary = json!({
        "command": "envelope",
        "gen": gen.source(),
        "phi": args.phi,
        "points": ys.len(),
        "slopes_tried": env.slopes_tried,
        "kept": env.kept.len(),
        "max_excess": env.max_excess,
        "max_gap_below_phi": max_gap,
        "decision": verdict.decision.to_string(),
        "label": verdict.label(),
    });
    let mut full = summary.clone();
    full["y"] = json!(ys);
    full["phi_values"] = json!(phis);
    full["f"] = json!(fs);
    full["verdict"] = to_json(&verdict);
    let mut table = Table::new(&["y", "phi", "f"]);
    for ((y, p), f) in ys.iter().zip(&phis).zip(fs) {
        table.push(vec![Cell::Num(*y), Cell::Num(*p), Cell::Num(*f)]);
    }
    Ok(Outcome { summary, full, table, ok: true })
}

pub fn classify(args: &ClassifyArgs) -> Result<Outcome, crate::CliError> {
    let gen = GeneratorSpec::parse(&args.gen, args.scan.dim).map_err(input)?;
    let scan = scan_from(&args.scan)?;
    let reports: Vec<CharacterizationReport> = vec![
        super_homogeneity_test(&gen, &default_lambdas(), &scan).map_err(input)?,
        self_financing_test(&gen, &scan).map_err(input)?,
        zero_interest_test(&gen, &scan).map_err(input)?,
        translation_invariance_test(&gen, &scan).map_err(input)?,
        periodicity_test(&gen, args.shift, &scan).map_err(input)?,
    ];
    let predictor = jensen_all_convex_predictor(&gen, &scan).map_err(input)?;
    let tests: Vec<Value> = reports
        .iter()
        .map(|r| json!({ "test": r.test, "verdict": r.verdict, "relation": r.relation, "margin": r.margin }))
        .collect();
    let summary = json!({
        "command": "classify",
        "gen": gen.source(),
        "dim_z": gen.dim_z(),
        "mu_hat": gen.mu_hat(),
        "flags": gen.flags(),
        "jensen_for_all_convex": predictor,
        "tests": tests,
    });
    let mut full = summary.clone();
    full["tests"] = to_json(&reports);
    let mut table = Table::new(&["test", "verdict", "relation", "margin"]);
    for r in &reports {
        let relation = r.relation.map(|x| to_json(&x).as_str().unwrap_or_default().to_string()).unwrap_or_default();
        table.push(vec![r.test.clone().into(), r.verdict.into(), relation.into(), r.margin.into()]);
    }
    Ok(Outcome { summary, full, table, ok: true })
}
