use serde::{Deserialize, Serialize};

use super::grid::{Slice, SpaceGrid, Surface, TimeGrid};
use super::{PayoffSpec, SolveError};
use crate::dsl::GeneratorSpec;

/// Largest admissible `dt / dx^2`.
pub const STABILITY_RATIO: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeConfig {
    /// Spatial nodes.
    pub nx: usize,
    /// Time steps over the whole horizon; chosen from the stability relation when absent.
    pub nt: Option<usize>,
    /// Explicit `[x_min, x_max]`; the drift-widened Gaussian box when absent.
    pub domain: Option<(f64, f64)>,
    /// Spatial origin `x_0` at which `y0` is read.
    pub x0: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig { nx: 401, nt: None, domain: None, x0: 0.0 }
    }
}

impl PdeConfig {
    pub fn with_nx(nx: usize) -> Self {
        PdeConfig { nx, ..Self::default() }
    }

    pub fn space_grid(&self, center: f64, horizon: f64, mu_hat: f64) -> Result<SpaceGrid, SolveError> {
        match self.domain {
            Some((lo, hi)) => SpaceGrid::new(lo, hi, self.nx),
            None => SpaceGrid::for_problem(center, horizon, mu_hat, self.nx),
        }
    }

    /// Steps for a sub-interval of length `len` of a horizon of length `horizon`.
    fn steps(&self, grid: &SpaceGrid, len: f64, horizon: f64) -> Result<usize, SolveError> {
        let dx = grid.step();
        let dt_max = STABILITY_RATIO * dx * dx;
        match self.nt {
            Some(0) => Err(SolveError::StabilityViolation("zero time steps".into())),
            Some(nt) => {
                let dt = horizon / nt as f64;
                if dt > dt_max * (1.0 + 1e-12) {
                    return Err(SolveError::StabilityViolation(format!(
                        "dt = {dt:e} exceeds {STABILITY_RATIO} * dx^2 = {dt_max:e}"
                    )));
                }
                Ok(((len / dt) - 1e-9).ceil().max(1.0) as usize)
            }
            None => Ok((len / dt_max).ceil().max(1.0) as usize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeDiagnostics {
    pub scheme: String,
    pub boundary_mode: String,
    pub dt: f64,
    pub dx: f64,
    pub nt: usize,
    pub nx: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub mu_hat: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub surface: Surface,
    /// `∂_x u` by central differences.
    pub z_surface: Vec<Vec<f64>>,
    pub x0: f64,
    pub y0: f64,
    pub diagnostics: PdeDiagnostics,
}

impl SolveResult {
    pub fn value_at(&self, t: f64, x: f64) -> Result<f64, SolveError> {
        self.surface.trusted_value_at(t, x)
    }
}

fn check_generator(gen: &GeneratorSpec) -> Result<(), SolveError> {
    if gen.dim_z() != 1 {
        return Err(SolveError::UnsupportedDimension(gen.dim_z()));
    }
    Ok(())
}

fn check_peclet(grid: &SpaceGrid, mu_hat: f64) -> Result<(), SolveError> {
    // Central differencing of the gradient term stays monotone while the
    // transport per cell is dominated by diffusion.
    if mu_hat * grid.step() > 1.0 {
        return Err(SolveError::StabilityViolation(format!(
            "mu_hat * dx = {} > 1; refine the spatial grid",
            mu_hat * grid.step()
        )));
    }
    Ok(())
}

/// Interior spatial operator `u_xx / 2 + g(t, u, u_x)`.
fn operator(gen: &GeneratorSpec, t: f64, u: &[f64], dx: f64, out: &mut [f64]) {
    let inv_dx2 = 1.0 / (dx * dx);
    let inv_2dx = 0.5 / dx;
    let n = u.len();
    for j in 1..n - 1 {
        let uxx = (u[j + 1] - 2.0 * u[j] + u[j - 1]) * inv_dx2;
        let ux = (u[j + 1] - u[j - 1]) * inv_2dx;
        out[j] = 0.5 * uxx + gen.eval1(t, u[j], ux);
    }
}

/// Edge values from the assumption that `u` is affine near the boundary.
fn extrapolate(u: &mut [f64]) {
    let n = u.len();
    u[0] = 2.0 * u[1] - u[2];
    u[n - 1] = 2.0 * u[n - 2] - u[n - 3];
}

/// Marches `u` backward from `t1` to `t0` in `steps` SSP-RK2 steps and
/// returns every row, ascending in time.
fn march(gen: &GeneratorSpec, terminal: &Slice, t0: f64, t1: f64, steps: usize) -> Result<Surface, SolveError> {
    let grid = terminal.grid;
    let n = grid.n;
    let dx = grid.step();
    let tg = TimeGrid { t_start: t0, t_end: t1, steps };
    let dt = tg.dt();
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(terminal.values.clone());
    let mut u = terminal.values.clone();
    let mut stage = vec![0.0; n];
    let mut l = vec![0.0; n];
    for k in (0..steps).rev() {
        let (t_hi, t_lo) = (tg.t(k + 1), tg.t(k));
        operator(gen, t_hi, &u, dx, &mut l);
        for j in 1..n - 1 {
            stage[j] = u[j] + dt * l[j];
        }
        extrapolate(&mut stage);
        operator(gen, t_lo, &stage, dx, &mut l);
        for j in 1..n - 1 {
            u[j] = 0.5 * u[j] + 0.5 * (stage[j] + dt * l[j]);
        }
        extrapolate(&mut u);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite { t: t_lo });
        }
        rows.push(u.clone());
    }
    rows.reverse();
    let times = (0..=steps).map(|k| tg.t(k)).collect();
    let elapsed = (0..=steps).map(|k| terminal.elapsed + (t1 - tg.t(k))).collect();
    Ok(Surface { times, grid, values: rows, elapsed, drift: terminal.drift.max(gen.mu_hat()) })
}

/// Solves backward from the data in `terminal` at `t1` down to `t0` in `nt`
/// steps (chosen from the stability relation when absent).
pub fn solve_pde_from_row(
    gen: &GeneratorSpec,
    terminal: &Slice,
    t0: f64,
    t1: f64,
    nt: Option<usize>,
) -> Result<Surface, SolveError> {
    check_generator(gen)?;
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(SolveError::InvalidInput(format!("time interval [{t0}, {t1}]")));
    }
    if terminal.values.len() != terminal.grid.n {
        return Err(SolveError::InvalidInput("terminal row length differs from grid".into()));
    }
    check_peclet(&terminal.grid, gen.mu_hat())?;
    let cfg = PdeConfig { nx: terminal.grid.n, nt, domain: None, x0: 0.0 };
    let steps = if t1 == t0 { 0 } else { cfg.steps(&terminal.grid, t1 - t0, t1 - t0)? };
    if steps == 0 {
        return Ok(Surface {
            times: vec![t1],
            grid: terminal.grid,
            values: vec![terminal.values.clone()],
            elapsed: vec![terminal.elapsed],
            drift: terminal.drift,
        });
    }
    march(gen, terminal, t0, t1, steps)
}

fn diagnostics(gen: &GeneratorSpec, surface: &Surface) -> PdeDiagnostics {
    let nt = surface.times.len() - 1;
    let dt = if nt > 0 { surface.times[1] - surface.times[0] } else { 0.0 };
    PdeDiagnostics {
        scheme: "ssp-rk2 in time, central differences in space".into(),
        boundary_mode: "affine extrapolation".into(),
        dt,
        dx: surface.grid.step(),
        nt,
        nx: surface.grid.n,
        x_min: surface.grid.x_min,
        x_max: surface.grid.x_max,
        mu_hat: gen.mu_hat(),
    }
}

fn solve_interval(
    gen: &GeneratorSpec,
    payoff: &PayoffSpec,
    t0: f64,
    horizon: f64,
    x0: f64,
    config: &PdeConfig,
) -> Result<SolveResult, SolveError> {
    check_generator(gen)?;
    if !(horizon >= t0) || t0 < 0.0 || !horizon.is_finite() {
        return Err(SolveError::InvalidInput(format!("need 0 <= t <= T, got t={t0}, T={horizon}")));
    }
    let grid = config.space_grid(x0, horizon - t0, gen.mu_hat())?;
    check_peclet(&grid, gen.mu_hat())?;
    payoff.verify_growth(&grid)?;
    let terminal = Slice::exact(grid, |x| payoff.value(x));
    let surface = if horizon == t0 {
        solve_pde_from_row(gen, &terminal, t0, horizon, None)?
    } else {
        let steps = config.steps(&grid, horizon - t0, horizon - t0)?;
        march(gen, &terminal, t0, horizon, steps)?
    };
    let y0 = surface.trusted_value_at(t0, x0)?;
    let z_surface = surface.x_derivative();
    let diagnostics = diagnostics(gen, &surface);
    Ok(SolveResult { surface, z_surface, x0, y0, diagnostics })
}

/// Solves `u_t + u_xx / 2 + g(t, u, u_x) = 0`, `u(T) = phi` on `[0, T]`.
pub fn solve_pde(
    gen: &GeneratorSpec,
    payoff: &PayoffSpec,
    horizon: f64,
    config: &PdeConfig,
) -> Result<SolveResult, SolveError> {
    solve_interval(gen, payoff, 0.0, horizon, config.x0, config)
}

/// `E^g_{t,T}[phi(x + W_T - W_t)]`, i.e. `u(t, x)`.
pub fn g_expectation(
    gen: &GeneratorSpec,
    payoff: &PayoffSpec,
    t: f64,
    horizon: f64,
    x: f64,
    config: &PdeConfig,
) -> Result<f64, SolveError> {
    if t == horizon {
        return Ok(payoff.value(x));
    }
    Ok(solve_interval(gen, payoff, t, horizon, x, config)?.y0)
}

/// Backward solve split at intermediate times, each segment started from the
/// previous segment's row.
#[derive(Debug, Clone)]
pub struct ChainedSolve {
    /// `0, t_1, ..., T`.
    pub times: Vec<f64>,
    /// Segment `k` covers `[times[k], times[k + 1]]`.
    pub segments: Vec<Surface>,
    pub x0: f64,
    pub y0: f64,
}

impl ChainedSolve {
    /// Row at `times[k]`.
    pub fn slice(&self, k: usize) -> Result<Slice, SolveError> {
        if k == self.segments.len() {
            let last = self.segments.last().expect("at least one segment");
            return last.slice_at(*self.times.last().expect("nonempty"));
        }
        self.segments[k].slice_at(self.times[k])
    }

    pub fn value_at(&self, t: f64, x: f64) -> Result<f64, SolveError> {
        let k = self.times.windows(2).position(|w| t >= w[0] && t <= w[1]).ok_or_else(|| {
            SolveError::InterpolationOutOfRange(format!("t={t} outside the chained horizon"))
        })?;
        self.segments[k].trusted_value_at(t, x)
    }
}

/// Chained solve: the segment ending at `t_{k+1}` starts from the surface
/// computed at `t_{k+1}`.
pub fn conditional_g_expectation_path(
    gen: &GeneratorSpec,
    payoff: &PayoffSpec,
    horizon: f64,
    intermediate: &[f64],
    config: &PdeConfig,
) -> Result<ChainedSolve, SolveError> {
    check_generator(gen)?;
    if !(horizon > 0.0) {
        return Err(SolveError::InvalidInput(format!("horizon {horizon} must be positive")));
    }
    let mut prev = 0.0;
    for &t in intermediate {
        if !(t > prev && t < horizon) && !(t == 0.0 && prev == 0.0) {
            return Err(SolveError::InterpolationOutOfRange(format!(
                "intermediate times must be increasing inside (0, {horizon}); got {t}"
            )));
        }
        prev = t;
    }
    let mut times = vec![0.0];
    times.extend(intermediate.iter().copied().filter(|&t| t > 0.0));
    times.push(horizon);

    let grid = config.space_grid(config.x0, horizon, gen.mu_hat())?;
    check_peclet(&grid, gen.mu_hat())?;
    payoff.verify_growth(&grid)?;
    let total_steps = config.steps(&grid, horizon, horizon)?;
    let dt = horizon / total_steps as f64;

    let mut slice = Slice::exact(grid, |x| payoff.value(x));
    let mut segments = Vec::with_capacity(times.len() - 1);
    for w in times.windows(2).rev() {
        let (t0, t1) = (w[0], w[1]);
        let steps = (((t1 - t0) / dt) - 1e-9).ceil().max(1.0) as usize;
        let surface = march(gen, &slice, t0, t1, steps)?;
        slice = surface.slice_at(t0)?;
        segments.push(surface);
    }
    segments.reverse();
    let y0 = segments[0].trusted_value_at(0.0, config.x0)?;
    Ok(ChainedSolve { times, segments, x0: config.x0, y0 })
}
