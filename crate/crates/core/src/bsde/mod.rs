//! g-expectations `E^g_{t,T}[phi(W_T)]` from the scalar BSDE
//! `Y_t = X + ∫_t^T g(s, Y_s, Z_s) ds - ∫_t^T Z_s dW_s` with one-dimensional
//! Brownian state.
//!
//! Two independent routes are provided: [`solve_pde`] marches the semilinear
//! PDE `u_t + u_xx / 2 + g(t, u, u_x) = 0` backward from `u(T, .) = phi`, and
//! [`solve_mc`] runs least-squares regression Monte Carlo on simulated paths.

mod grid;
mod mc;
mod payoff;
mod pde;

pub use grid::{boundary_reach, Slice, SpaceGrid, Surface, TimeGrid, TRUST_SIGMAS};
pub use mc::{solve_mc, McConfig, McDiagnostics, McResult};
pub use payoff::{truncate_payoff, GrowthBound, PayoffSpec};
pub use pde::{
    conditional_g_expectation_path, g_expectation, solve_pde, solve_pde_from_row, ChainedSolve, PdeConfig,
    PdeDiagnostics, SolveResult, STABILITY_RATIO,
};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("stability relation violated: {0}")]
    StabilityViolation(String),
    #[error("domain too small: boundary influence reaches x={x} at t={t}")]
    DomainTooSmall { t: f64, x: f64 },
    #[error("solvers support d=1 only (generator has d={0})")]
    UnsupportedDimension(usize),
    #[error("regression normal matrix is singular (condition number {condition:e} at step {step})")]
    RegressionSingular { step: usize, condition: f64 },
    #[error("Picard iteration does not contract: mu_hat*dt = {0}")]
    PicardDivergence(f64),
    #[error("interpolation out of range: {0}")]
    InterpolationOutOfRange(String),
    #[error("payoff growth bound violated at x={x}: |phi|={value} > {bound}")]
    GrowthBoundViolated { x: f64, value: f64, bound: f64 },
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error("non-finite value in solution at t={t}")]
    NonFinite { t: f64 },
}
