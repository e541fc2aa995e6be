//! Pointwise g-convexity criteria: the operator `L_g`, shape verdicts for
//! smooth and kinked candidates, the affine sets `Π_g^a` and `Π_g^v`, the
//! g-convex envelope and the derived closure rules.

mod affine;
mod composition;
mod envelope;
mod operator;
mod scan;
mod shape;

pub use affine::{pi_a_membership, pi_v_membership, AffinePair, Membership};
pub use composition::{
    check_composition, slope_bound_check, special_case_z_independent, CompositionCase, SlopeBoundVerdict, SlopeSign,
};
pub use envelope::{combine_sup, g_convex_envelope, Envelope, SlopeGrid, YGrid};
pub use operator::{l_g_from_jet, l_g_operator};
pub use scan::{Scan, Witness};
pub use shape::{check_nonsmooth, check_shape, second_difference_test, ConvexityVerdict, Decision, Method, Mode, ScanReport};

use thiserror::Error;

use crate::function::FunctionError;

/// Operator tolerance for symbolic candidates.
pub const TAU_SYMBOLIC: f64 = 1e-9;

/// Operator tolerance `10 Δ^2` for candidates tabulated with spacing `Δ`.
pub fn tau_tabulated(step: f64) -> f64 {
    10.0 * step * step
}

/// Left and right difference quotients further apart than `100 Δ` mark a kink.
pub fn tau_kink(step: f64) -> f64 {
    100.0 * step
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConvexityError {
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error("derivative unavailable at y={y}: {reason}")]
    DerivativeUnavailable { y: f64, reason: String },
    #[error("only {valid} grid points admit second derivatives (need at least 10)")]
    GridTooCoarse { valid: usize },
    #[error("no affine minorant with slope on the grid belongs to Π_g^v")]
    EmptyMinorantFamily,
    #[error("family member {index} exceeds the dominator at y={y} by {excess}")]
    DominationViolated { index: usize, y: f64, excess: f64 },
    #[error("hypothesis not verified: {0}")]
    HypothesisNotVerified(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("invalid scan: {0}")]
    InvalidScan(String),
    #[error("z has dimension {got}, generator expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}
