//! Driver-expression language: parsing, validation, evaluation and
//! grid-based classification of generators `g(t, y, z)`.

mod expr;
mod generator;
mod parser;

pub use expr::{Expr, VarUsage};
pub use generator::{
    classify_generator, estimate_lipschitz, GeneratorFlags, GeneratorSpec, LipschitzEstimate,
    ValidationDomain, CLASSIFY_TOLERANCE,
};
pub use parser::{parse_expr, VarSet};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DslError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable '{name}' at byte {offset}")]
    UnknownVariable { offset: usize, name: String },
    #[error("denominator '{denominator}' can vanish on the validation grid")]
    DivisionHazard { denominator: String },
    #[error("Lipschitz estimate grows under refinement ({coarse} -> {fine})")]
    NonLipschitz { coarse: f64, fine: f64 },
    #[error("expression is not finite at (t={t}, y={y})")]
    NonFinite { t: f64, y: f64 },
    #[error("dimension mismatch: expected d={expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid validation domain: {0}")]
    InvalidDomain(String),
}

impl DslError {
    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        DslError::Syntax { offset, message: message.into() }
    }

    pub(crate) fn unknown_variable(offset: usize, name: &str) -> Self {
        DslError::UnknownVariable { offset, name: name.to_string() }
    }
}

/// A validated generator expression over `(t, y, z_1..z_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorExpr {
    ast: Expr,
    dim_z: usize,
}

impl GeneratorExpr {
    /// Wraps an already-built tree, checking variable indices and division
    /// hazards on the default validation domain.
    pub fn new(ast: Expr, dim_z: usize) -> Result<Self, DslError> {
        Self::with_domain(ast, dim_z, &ValidationDomain::default())
    }

    pub fn with_domain(ast: Expr, dim_z: usize, domain: &ValidationDomain) -> Result<Self, DslError> {
        if dim_z == 0 {
            return Err(DslError::DimensionMismatch { expected: 1, got: 0 });
        }
        let usage = ast.usage();
        if let Some(&k) = usage.z.iter().find(|&&k| k >= dim_z) {
            return Err(DslError::UnknownVariable { offset: 0, name: format!("z{}", k + 1) });
        }
        generator::check_division_hazards(&ast, dim_z, domain)?;
        Ok(GeneratorExpr { ast, dim_z })
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn dim_z(&self) -> usize {
        self.dim_z
    }

    /// `g(t, y, z)`; `z` must have length `dim_z`.
    #[inline]
    pub fn eval(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim_z);
        self.ast.eval(t, y, z)
    }
}

impl std::fmt::Display for GeneratorExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.ast.fmt(f)
    }
}

/// Parses and validates a generator source string.
pub fn parse_generator(source: &str, dim_z: usize) -> Result<GeneratorExpr, DslError> {
    if dim_z == 0 {
        return Err(DslError::DimensionMismatch { expected: 1, got: 0 });
    }
    let ast = parse_expr(source, VarSet::Generator { dim_z })?;
    GeneratorExpr::new(ast, dim_z)
}

/// Evaluates `g(t, y, z)` after checking the dimension of `z`.
pub fn eval_generator(expr: &GeneratorExpr, t: f64, y: f64, z: &[f64]) -> Result<f64, DslError> {
    if z.len() != expr.dim_z() {
        return Err(DslError::DimensionMismatch { expected: expr.dim_z(), got: z.len() });
    }
    Ok(expr.eval(t, y, z))
}
