//! Candidate functions `h` and payoffs `phi`: symbolic expressions with exact
//! derivatives, or values tabulated on a uniform grid.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_expr, DslError, Expr, ValidationDomain, VarSet};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FunctionError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("tabulated grid must be uniform and strictly increasing: {0}")]
    BadGrid(String),
    #[error("derivative unavailable at y={y}: {reason}")]
    DerivativeUnavailable { y: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothness {
    C2,
    Continuous,
}

/// `h`, `h'` and `h''` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicFunction {
    expr: Expr,
    derivs: Option<(Expr, Expr)>,
    source: String,
}

impl SymbolicFunction {
    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn first_derivative(&self) -> Option<&Expr> {
        self.derivs.as_ref().map(|(d1, _)| d1)
    }

    pub fn second_derivative(&self) -> Option<&Expr> {
        self.derivs.as_ref().map(|(_, d2)| d2)
    }
}

/// Values on the uniform grid `y_min + i * step`, `i = 0..values.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedFunction {
    y_min: f64,
    step: f64,
    values: Vec<f64>,
}

impl TabulatedFunction {
    pub fn new(y_min: f64, step: f64, values: Vec<f64>) -> Result<Self, FunctionError> {
        if !(step > 0.0 && step.is_finite() && y_min.is_finite()) {
            return Err(FunctionError::BadGrid(format!("step {step}, start {y_min}")));
        }
        if values.len() < 2 {
            return Err(FunctionError::BadGrid("need at least two nodes".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FunctionError::BadGrid(format!("non-finite value at node {i}")));
        }
        Ok(TabulatedFunction { y_min, step, values })
    }

    /// Builds a table from explicit abscissae, which must be uniform and
    /// strictly increasing (relative tolerance 1e-9 on the spacing).
    pub fn from_points(ys: &[f64], values: Vec<f64>) -> Result<Self, FunctionError> {
        if ys.len() != values.len() {
            return Err(FunctionError::BadGrid("abscissae and values differ in length".into()));
        }
        if ys.len() < 2 {
            return Err(FunctionError::BadGrid("need at least two nodes".into()));
        }
        let step = (ys[ys.len() - 1] - ys[0]) / ((ys.len() - 1) as f64);
        if !(step > 0.0) {
            return Err(FunctionError::BadGrid("abscissae not increasing".into()));
        }
        for (i, w) in ys.windows(2).enumerate() {
            let d = w[1] - w[0];
            if !(d > 0.0) || (d - step).abs() > 1e-9 * step.max(1.0) {
                return Err(FunctionError::BadGrid(format!("spacing at node {i} is {d}, expected {step}")));
            }
        }
        Self::new(ys[0], step, values)
    }

    pub fn sample(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, FunctionError> {
        if n < 2 || !(hi > lo) {
            return Err(FunctionError::BadGrid(format!("[{lo}, {hi}] with {n} nodes")));
        }
        let step = (hi - lo) / ((n - 1) as f64);
        let values = (0..n).map(|i| f(node(lo, hi, n, i))).collect();
        Self::new(lo, step, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_at(self.values.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn y_at(&self, i: usize) -> f64 {
        self.y_min + self.step * i as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.y_at(i)).collect()
    }

    /// Piecewise-linear interpolation; linear extrapolation from the end cells.
    pub fn value(&self, y: f64) -> f64 {
        let n = self.values.len();
        let s = (y - self.y_min) / self.step;
        let i = if s <= 0.0 { 0 } else { (s.floor() as usize).min(n - 2) };
        let w = s - i as f64;
        if w == 0.0 {
            return self.values[i];
        }
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Index of the grid node within `1e-9 * step` of `y`.
    pub fn node_index(&self, y: f64) -> Option<usize> {
        let s = (y - self.y_min) / self.step;
        let i = s.round();
        if i < 0.0 || i as usize >= self.values.len() || (s - i).abs() > 1e-9 {
            None
        } else {
            Some(i as usize)
        }
    }

    /// Backward and forward difference quotients at interior node `i`.
    pub fn one_sided_slopes(&self, i: usize) -> Option<(f64, f64)> {
        if i == 0 || i + 1 >= self.values.len() {
            return None;
        }
        let v = &self.values;
        Some(((v[i] - v[i - 1]) / self.step, (v[i + 1] - v[i]) / self.step))
    }

    /// Difference-quotient jet at interior node `i`.
    pub fn jet_at(&self, i: usize) -> Option<Jet> {
        let (left, right) = self.one_sided_slopes(i)?;
        Some(Jet { value: self.values[i], d1: 0.5 * (left + right), d2: (right - left) / self.step })
    }
}

/// Node `i` of the uniform grid with `n` points on `[lo, hi]`, written as a
/// weighted mean so that endpoints and the midpoint of symmetric grids are exact.
#[inline]
pub(crate) fn node(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        return lo;
    }
    let m = (n - 1) as f64;
    let k = i as f64;
    (lo * (m - k) + hi * k) / m
}

/// A real function of one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFunction {
    Symbolic(SymbolicFunction),
    Tabulated(TabulatedFunction),
}

impl ScalarFunction {
    /// Parses a one-variable expression (written in `y` or `x`).
    pub fn parse(source: &str) -> Result<Self, FunctionError> {
        let expr = parse_expr(source, VarSet::Scalar)?;
        let mut f = Self::from_expr(expr)?;
        if let ScalarFunction::Symbolic(s) = &mut f {
            s.source = source.trim().to_string();
        }
        Ok(f)
    }

    pub fn from_expr(expr: Expr) -> Result<Self, FunctionError> {
        let usage = expr.usage();
        if usage.t || usage.uses_z() {
            return Err(DslError::UnknownVariable { offset: 0, name: "t/z in a scalar function".into() }.into());
        }
        crate::dsl::GeneratorExpr::with_domain(expr.clone(), 1, &ValidationDomain::default())?;
        let derivs = if expr.is_smooth() {
            let d1 = expr.derivative_y().expect("smooth tree differentiates");
            let d2 = d1.derivative_y().expect("smooth tree differentiates");
            Some((d1, d2))
        } else {
            None
        };
        let source = expr.to_string();
        Ok(ScalarFunction::Symbolic(SymbolicFunction { expr, derivs, source }))
    }

    pub fn identity() -> Self {
        Self::from_expr(Expr::Y).expect("identity is valid")
    }

    /// `a * y + b`.
    pub fn affine(a: f64, b: f64) -> Self {
        let e = Expr::Add(Box::new(Expr::Mul(Box::new(Expr::constant(a)), Box::new(Expr::Y))), Box::new(Expr::constant(b)));
        Self::from_expr(e).expect("affine map is valid")
    }

    pub fn tabulate_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, FunctionError> {
        Ok(ScalarFunction::Tabulated(TabulatedFunction::sample(lo, hi, n, f)?))
    }

    pub fn value(&self, y: f64) -> f64 {
        match self {
            ScalarFunction::Symbolic(s) => s.expr.eval_scalar(y),
            ScalarFunction::Tabulated(t) => t.value(y),
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match self {
            ScalarFunction::Symbolic(s) if s.derivs.is_some() => Smoothness::C2,
            _ => Smoothness::Continuous,
        }
    }

    pub fn as_symbolic(&self) -> Option<&SymbolicFunction> {
        match self {
            ScalarFunction::Symbolic(s) => Some(s),
            ScalarFunction::Tabulated(_) => None,
        }
    }

    pub fn as_tabulated(&self) -> Option<&TabulatedFunction> {
        match self {
            ScalarFunction::Tabulated(t) => Some(t),
            ScalarFunction::Symbolic(_) => None,
        }
    }

    /// Exact derivatives for C2 symbolic functions; difference quotients at
    /// interior nodes of tables. Non-smooth symbolic functions have none.
    pub fn jet(&self, y: f64) -> Result<Jet, FunctionError> {
        match self {
            ScalarFunction::Symbolic(s) => match &s.derivs {
                Some((d1, d2)) => Ok(Jet { value: s.expr.eval_scalar(y), d1: d1.eval_scalar(y), d2: d2.eval_scalar(y) }),
                None => Err(FunctionError::DerivativeUnavailable { y, reason: "non-smooth expression".into() }),
            },
            ScalarFunction::Tabulated(t) => t
                .node_index(y)
                .and_then(|i| t.jet_at(i))
                .ok_or_else(|| FunctionError::DerivativeUnavailable { y, reason: "not an interior grid node".into() }),
        }
    }

    pub fn to_tabulated(&self, lo: f64, hi: f64, n: usize) -> Result<TabulatedFunction, FunctionError> {
        TabulatedFunction::sample(lo, hi, n, |y| self.value(y))
    }

    /// `self ∘ inner`, symbolic when both parts are.
    pub fn compose_symbolic(&self, inner: &ScalarFunction) -> Option<ScalarFunction> {
        match (self, inner) {
            (ScalarFunction::Symbolic(o), ScalarFunction::Symbolic(i)) => {
                Self::from_expr(o.expr.substitute_y(&i.expr)).ok()
            }
            _ => None,
        }
    }

    /// `self ∘ inner`: symbolic when possible, else tabulated on `[lo, hi]`.
    pub fn compose(&self, inner: &ScalarFunction, lo: f64, hi: f64, n: usize) -> Result<ScalarFunction, FunctionError> {
        if let Some(f) = self.compose_symbolic(inner) {
            return Ok(f);
        }
        Self::tabulate_fn(lo, hi, n, |y| self.value(inner.value(y)))
    }

    /// Human-readable label: the source text or a table summary.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFunction::Symbolic(s) => f.write_str(&s.source),
            ScalarFunction::Tabulated(t) => {
                write!(f, "table[{} nodes on [{}, {}]]", t.len(), t.y_min(), t.y_max())
            }
        }
    }
}
