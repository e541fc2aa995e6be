//! Numerical laboratory for g-expectations and g-convexity.
//!
//! The crate computes nonlinear expectations `E^g_{t,T}[X]` by solving scalar
//! backward SDEs (a finite-difference solver for the associated semilinear
//! PDE and a regression Monte Carlo cross-check), and decides whether a
//! function `h` satisfies the generalized Jensen inequality
//! `h(E^g[X]) <= E^g[h(X)]` through the pointwise operator
//!
//! ```text
//! L_g h(t, y, z) = 1/2 h''(y) |z|^2 + g(t, h(y), h'(y) z) - h'(y) g(t, y, z)
//! ```
//!
//! and its almost-everywhere extension to continuous convex `h`.

pub mod bsde;
pub mod characterization;
pub mod convexity;
pub mod dsl;
pub mod function;
pub mod lab;

pub use dsl::{GeneratorExpr, GeneratorSpec};
pub use function::{ScalarFunction, TabulatedFunction};
