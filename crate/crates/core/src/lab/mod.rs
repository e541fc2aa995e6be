//! End-to-end checks tying the pointwise criterion to solver output: the
//! Jensen gap, epigraph viability, g-martingale transforms, the axioms of
//! g-expectations and stability of g-convexity under uniform limits.

mod axioms;
mod batch;
mod jensen;
mod process;
mod stability;

pub use axioms::{axiom_report, axiom_suite, AxiomCheck, AxiomReport};
pub use batch::{
    catalog, parse_batch, run_batch, BatchFile, Expectation, ScenarioEntry, ScenarioRecord, SolverSection, CATALOG_TOML,
};
pub use jensen::{
    verify_jensen, viability_check, witness_scenario, GapLocation, JensenReport, JensenRow, ViabilityReport,
};
pub use process::{
    classify_process, default_times, martingale_transform_suite, ProcessClass, ProcessReport, TransformEntry,
    TransformReport,
};
pub use stability::{smoothed_abs_sequence, stability_suite, StabilityReport};

use thiserror::Error;

use crate::bsde::{PayoffSpec, PdeConfig, SolveError, SpaceGrid};
use crate::convexity::ConvexityError;
use crate::dsl::GeneratorSpec;
use crate::function::{FunctionError, ScalarFunction};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Convexity(#[from] ConvexityError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error("discrepancies of both signs beyond {tol}: min {min} at (s={s_min}, x={x_min}), max {max} at (s={s_max}, x={x_max})")]
    InconclusiveClassification { min: f64, max: f64, s_min: f64, x_min: f64, s_max: f64, x_max: f64, tol: f64 },
    #[error("contradiction: {0}")]
    ContradictionDetected(String),
    #[error("terminal pair not in the epigraph: h(X1) exceeds X2 by {excess} at x={x}")]
    InputNotInEpigraph { x: f64, excess: f64 },
    #[error("viability violated at (t={t}, x={x}): X2 - h(X1) = {margin}")]
    ViabilityViolated { t: f64, x: f64, margin: f64 },
    #[error("axiom {axiom} violated at (t={t}, x={x}) by {value}")]
    AxiomViolated { axiom: String, t: f64, x: f64, value: f64 },
    #[error("scenario file: {0}")]
    Scenario(String),
}

/// Gap tolerance `max(5e-3, 10 Δx^2)`.
pub fn tol_solver(dx: f64) -> f64 {
    (10.0 * dx * dx).max(5e-3)
}

/// One Jensen experiment: `h(E^g[phi(W_T)])` against `E^g[h(phi(W_T))]`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub gen: GeneratorSpec,
    pub payoff: PayoffSpec,
    pub h: ScalarFunction,
    pub horizon: f64,
    /// Times at which rows of the report are produced.
    pub eval_times: Vec<f64>,
    pub solver: PdeConfig,
    /// Overrides `tol_solver`.
    pub tol: Option<f64>,
}

impl Scenario {
    pub fn new(id: impl Into<String>, gen: GeneratorSpec, payoff: PayoffSpec, h: ScalarFunction, horizon: f64) -> Self {
        Scenario {
            id: id.into(),
            gen,
            payoff,
            h,
            horizon,
            eval_times: vec![0.0],
            solver: PdeConfig::default(),
            tol: None,
        }
    }

    /// Parses generator, payoff and `h` from DSL sources.
    pub fn parse(id: &str, gen: &str, payoff: &str, h: &str, horizon: f64) -> Result<Self, LabError> {
        let gen = GeneratorSpec::parse(gen, 1).map_err(FunctionError::from)?;
        Ok(Scenario::new(id, gen, PayoffSpec::parse(payoff)?, ScalarFunction::parse(h)?, horizon))
    }

    pub fn grid(&self) -> Result<SpaceGrid, LabError> {
        Ok(self.solver.space_grid(self.solver.x0, self.horizon, self.gen.mu_hat())?)
    }

    pub fn tolerance(&self) -> Result<f64, LabError> {
        Ok(self.tol.unwrap_or(tol_solver(self.grid()?.step())))
    }

    /// `h ∘ phi` as a payoff, tabulated over the solve domain when not symbolic.
    pub fn transformed_payoff(&self) -> Result<PayoffSpec, LabError> {
        compose_payoff(&self.h, &self.payoff, &self.grid()?)
    }
}

pub(crate) fn compose_payoff(h: &ScalarFunction, payoff: &PayoffSpec, grid: &SpaceGrid) -> Result<PayoffSpec, LabError> {
    let f = h.compose(payoff.phi(), grid.x_min, grid.x_max, 4 * (grid.n - 1) + 1)?;
    let spec = PayoffSpec::new(f);
    spec.verify_growth(grid)?;
    Ok(spec)
}
