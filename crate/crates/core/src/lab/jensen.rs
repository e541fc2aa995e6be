use serde::Serialize;

use super::{compose_payoff, tol_solver, LabError, Scenario};
use crate::bsde::{solve_pde, PayoffSpec, PdeConfig, Surface};
use crate::convexity::Witness;
use crate::dsl::GeneratorSpec;
use crate::function::ScalarFunction;

/// Horizon of scenarios built around a criterion witness.
pub const WITNESS_HORIZON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapLocation {
    pub t: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JensenRow {
    pub t: f64,
    pub x: f64,
    /// `h(u_X(t, x))`.
    pub lhs: f64,
    /// `u_{h(X)}(t, x)`.
    pub rhs: f64,
    pub gap: f64,
    /// Smallest gap over the trusted nodes of this time.
    pub row_min_gap: f64,
    pub row_min_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JensenReport {
    pub id: String,
    pub gen: String,
    pub h: String,
    pub payoff: String,
    pub horizon: f64,
    pub holds: bool,
    pub tol: f64,
    pub min_gap: f64,
    pub min_at: GapLocation,
    /// Grid points compared.
    pub points: usize,
    pub dx: f64,
    pub dt: f64,
    pub rows: Vec<JensenRow>,
}

impl JensenReport {
    pub fn verdict(&self) -> &'static str {
        if self.holds {
            "holds"
        } else {
            "fails"
        }
    }
}

/// Smallest `b - f(a)` over the trusted nodes of every row, with its location.
fn min_margin(a: &Surface, b: &Surface, f: &ScalarFunction) -> (f64, GapLocation, usize) {
    let mut best = (f64::INFINITY, GapLocation { t: a.times[0], x: a.grid.x(0) }, 0);
    for k in 0..a.times.len() {
        let (ra, rb) = (a.trusted_range(k), b.trusted_range(k));
        for j in ra.start.max(rb.start)..ra.end.min(rb.end) {
            let m = b.values[k][j] - f.value(a.values[k][j]);
            best.2 += 1;
            if m < best.0 {
                best.0 = m;
                best.1 = GapLocation { t: a.times[k], x: a.grid.x(j) };
            }
        }
    }
    best
}

fn row(u: &Surface, v: &Surface, h: &ScalarFunction, t: f64, x: f64) -> Result<JensenRow, LabError> {
    let lhs = h.value(u.trusted_value_at(t, x)?);
    let rhs = v.trusted_value_at(t, x)?;
    let (ru, rv) = (u.row_at(t)?, v.row_at(t)?);
    let range = u.grid.interior_range(u.reach_at(t)?.max(v.reach_at(t)?));
    let (row_min_gap, row_min_x) = range
        .map(|j| (rv[j] - h.value(ru[j]), u.grid.x(j)))
        .fold((f64::INFINITY, x), |acc, p| if p.0 < acc.0 { p } else { acc });
    Ok(JensenRow { t, x, lhs, rhs, gap: rhs - lhs, row_min_gap, row_min_x })
}

/// Solves with terminal data `phi` and `h ∘ phi` and compares `h(u_X)` with
/// `u_{h(X)}` on every trusted grid point.
pub fn verify_jensen(sc: &Scenario) -> Result<JensenReport, LabError> {
    let u = solve_pde(&sc.gen, &sc.payoff, sc.horizon, &sc.solver)?;
    let v = solve_pde(&sc.gen, &sc.transformed_payoff()?, sc.horizon, &sc.solver)?;
    let tol = sc.tolerance()?;
    let (min_gap, min_at, points) = min_margin(&u.surface, &v.surface, &sc.h);
    let rows = sc
        .eval_times
        .iter()
        .map(|&t| row(&u.surface, &v.surface, &sc.h, t, sc.solver.x0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(JensenReport {
        id: sc.id.clone(),
        gen: sc.gen.source().to_string(),
        h: sc.h.label(),
        payoff: sc.payoff.phi().label(),
        horizon: sc.horizon,
        holds: min_gap >= -tol,
        tol,
        min_gap,
        min_at,
        points,
        dx: u.diagnostics.dx,
        dt: u.diagnostics.dt,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViabilityReport {
    /// Smallest `u2 - h(u1)` over trusted grid points.
    pub min_margin: f64,
    pub min_at: GapLocation,
    pub tol: f64,
}

/// The pair `(E^g[X1], E^g[X2])` stays in the epigraph of `h` when it starts there.
pub fn viability_check(
    gen: &GeneratorSpec,
    h: &ScalarFunction,
    x1: &PayoffSpec,
    x2: &PayoffSpec,
    horizon: f64,
    config: &PdeConfig,
) -> Result<ViabilityReport, LabError> {
    let grid = config.space_grid(config.x0, horizon, gen.mu_hat())?;
    for x in grid.points() {
        let excess = h.value(x1.value(x)) - x2.value(x);
        if excess > 1e-9 * (1.0 + x2.value(x).abs()) {
            return Err(LabError::InputNotInEpigraph { x, excess });
        }
    }
    let u1 = solve_pde(gen, x1, horizon, config)?;
    let u2 = solve_pde(gen, x2, horizon, config)?;
    let tol = tol_solver(grid.step());
    let (min_margin, min_at, _) = min_margin(&u1.surface, &u2.surface, h);
    if min_margin < -tol {
        return Err(LabError::ViabilityViolated { t: min_at.t, x: min_at.x, margin: min_margin });
    }
    Ok(ViabilityReport { min_margin, min_at, tol })
}

/// Viability of `(phi, h ∘ phi)` for a scenario.
pub(crate) fn scenario_viability(sc: &Scenario) -> Result<ViabilityReport, LabError> {
    let hx = compose_payoff(&sc.h, &sc.payoff, &sc.grid()?)?;
    viability_check(&sc.gen, &sc.h, &sc.payoff, &hx, sc.horizon, &sc.solver)
}

/// Scenario localized at a criterion witness: linear payoff `y* + z* x` on
/// a short horizon, so that `(Y, Z)` stays near `(y*, z*)`.
pub fn witness_scenario(gen: &GeneratorSpec, h: &ScalarFunction, witness: &Witness) -> Result<Scenario, LabError> {
    let z = witness.z.first().copied().unwrap_or(0.0);
    let payoff = PayoffSpec::new(ScalarFunction::affine(z, witness.y));
    let mut sc = Scenario::new("witness", gen.clone(), payoff, h.clone(), WITNESS_HORIZON);
    sc.id = format!("witness(y={}, z={})", witness.y, z);
    Ok(sc)
}
