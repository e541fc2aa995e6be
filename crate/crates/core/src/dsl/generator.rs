use serde::{Deserialize, Serialize};

use super::expr::{Expr, VarUsage};
use super::{DslError, GeneratorExpr};
#[cfg(test)]
use super::parse_generator;

/// Tolerance for the grid classification flags. Evaluations are exact
/// arithmetic on the AST, so this only absorbs rounding.
pub const CLASSIFY_TOLERANCE: f64 = 1e-12;

/// Above this many samples the `t` axis (and then the others) is thinned.
const MAX_GRID_POINTS: usize = 4_000_000;

/// Box in `(t, y, z)` space with a per-axis resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationDomain {
    pub horizon: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub points: usize,
}

impl Default for ValidationDomain {
    fn default() -> Self {
        ValidationDomain { horizon: 1.0, y_min: -10.0, y_max: 10.0, z_min: -10.0, z_max: 10.0, points: 101 }
    }
}

impl ValidationDomain {
    pub fn with_horizon(horizon: f64) -> Self {
        ValidationDomain { horizon, ..Default::default() }
    }

    pub fn with_points(&self, points: usize) -> Self {
        ValidationDomain { points, ..self.clone() }
    }

    fn validate(&self) -> Result<(), DslError> {
        if self.points < 2 {
            return Err(DslError::InvalidDomain("need at least 2 points per axis".into()));
        }
        let ok = self.horizon.is_finite()
            && self.horizon >= 0.0
            && self.y_min < self.y_max
            && self.z_min < self.z_max
            && [self.y_min, self.y_max, self.z_min, self.z_max].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(DslError::InvalidDomain(format!("{self:?}")))
        }
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let span = hi - lo;
    (0..n).map(|i| lo + span * (i as f64) / ((n - 1) as f64)).collect()
}

/// Generator values on a tensor grid over `(t, y, z_1..z_d)`, last axis fastest.
/// Axes of variables the expression does not mention collapse to one point.
struct GridSample {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl GridSample {
    fn collect(expr: &Expr, dim_z: usize, domain: &ValidationDomain, n: usize) -> Result<Self, DslError> {
        let usage = expr.usage();
        let mut axes = Vec::with_capacity(dim_z + 2);
        axes.push(if usage.t { linspace(0.0, domain.horizon, n) } else { vec![0.0] });
        axes.push(if usage.y { linspace(domain.y_min, domain.y_max, n) } else { vec![0.0] });
        for k in 0..dim_z {
            axes.push(if usage.uses_z_component(k) { linspace(domain.z_min, domain.z_max, n) } else { vec![0.0] });
        }
        thin_axes(&mut axes);

        let total: usize = axes.iter().map(Vec::len).product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        let mut z = vec![0.0; dim_z];
        for _ in 0..total {
            let t = axes[0][idx[0]];
            let y = axes[1][idx[1]];
            for k in 0..dim_z {
                z[k] = axes[k + 2][idx[k + 2]];
            }
            let v = expr.eval(t, y, &z);
            if !v.is_finite() {
                return Err(DslError::NonFinite { t, y });
            }
            values.push(v);
            advance(&mut idx, &axes);
        }
        Ok(GridSample { axes, values })
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.axes.len()];
        for a in (0..self.axes.len() - 1).rev() {
            strides[a] = strides[a + 1] * self.axes[a + 1].len();
        }
        strides
    }

    /// Largest adjacent-pair slope `|Δg| / |Δv|` along axes `y, z_1..z_d`.
    fn max_axis_slope(&self) -> f64 {
        let strides = self.strides();
        let mut best: f64 = 0.0;
        for axis in 1..self.axes.len() {
            let pts = &self.axes[axis];
            if pts.len() < 2 {
                continue;
            }
            let stride = strides[axis];
            for (flat, &v) in self.values.iter().enumerate() {
                let i = (flat / stride) % pts.len();
                if i + 1 < pts.len() {
                    let dv = (self.values[flat + stride] - v).abs();
                    best = best.max(dv / (pts[i + 1] - pts[i]));
                }
            }
        }
        best
    }

    /// Max over lines parallel to the given axes of (max - min) of g.
    fn max_variation_along(&self, axes_varying: &[usize]) -> f64 {
        let strides = self.strides();
        // Group flat indices by their coordinates on the fixed axes.
        let fixed: Vec<usize> = (0..self.axes.len()).filter(|a| !axes_varying.contains(a)).collect();
        let mut key_stride = vec![0usize; self.axes.len()];
        let mut groups = 1usize;
        for &a in fixed.iter().rev() {
            key_stride[a] = groups;
            groups *= self.axes[a].len();
        }
        let mut lo = vec![f64::INFINITY; groups];
        let mut hi = vec![f64::NEG_INFINITY; groups];
        for (flat, &v) in self.values.iter().enumerate() {
            let mut key = 0;
            for &a in &fixed {
                let i = (flat / strides[a]) % self.axes[a].len();
                key += i * key_stride[a];
            }
            lo[key] = lo[key].min(v);
            hi[key] = hi[key].max(v);
        }
        lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max)
    }
}

fn thin_axes(axes: &mut [Vec<f64>]) {
    // Thin the t axis first: it is never differenced.
    loop {
        let total: usize = axes.iter().map(Vec::len).product();
        if total <= MAX_GRID_POINTS {
            return;
        }
        let axis = (0..axes.len()).max_by_key(|&a| (axes[a].len(), a == 0)).unwrap_or(0);
        let pts = &axes[axis];
        let n = (pts.len() + 1) / 2;
        let (lo, hi) = (pts[0], pts[pts.len() - 1]);
        axes[axis] = linspace(lo, hi, n.max(2));
    }
}

fn advance(idx: &mut [usize], axes: &[Vec<f64>]) {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < axes[a].len() {
            return;
        }
        idx[a] = 0;
    }
}

/// Grid Lipschitz evidence for a generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Estimate on the full-resolution grid.
    pub mu_hat: f64,
    /// Estimate on the grid with roughly half the points per axis.
    pub coarse: f64,
    pub points: usize,
}

/// Maximum adjacent-pair difference quotient of `g` along `y` and each `z_k`
/// (the sum-norm Lipschitz bound), checked for stability under refinement.
pub fn estimate_lipschitz(expr: &GeneratorExpr, domain: &ValidationDomain) -> Result<LipschitzEstimate, DslError> {
    domain.validate()?;
    let fine = GridSample::collect(expr.ast(), expr.dim_z(), domain, domain.points)?.max_axis_slope();
    let coarse_points = (domain.points + 1) / 2;
    let coarse = if coarse_points >= 2 {
        GridSample::collect(expr.ast(), expr.dim_z(), domain, coarse_points)?.max_axis_slope()
    } else {
        fine
    };
    if fine > 1.5 * coarse + CLASSIFY_TOLERANCE {
        return Err(DslError::NonLipschitz { coarse, fine });
    }
    Ok(LipschitzEstimate { mu_hat: fine, coarse, points: domain.points })
}

/// Structural flags of a generator, read off the validation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorFlags {
    pub independent_of_y: bool,
    pub independent_of_z: bool,
    /// `g(t, 0, 0) = 0` for all `t`.
    pub zero_at_origin: bool,
    /// `g(t, y, 0) = 0` for all `t, y`.
    pub zero_on_y_axis: bool,
}

pub fn classify_generator(expr: &GeneratorExpr, domain: &ValidationDomain) -> Result<GeneratorFlags, DslError> {
    domain.validate()?;
    let usage = expr.ast().usage();
    let dim_z = expr.dim_z();
    let sample = GridSample::collect(expr.ast(), dim_z, domain, domain.points)?;
    let z_axes: Vec<usize> = (2..dim_z + 2).collect();
    let independent_of_y = !usage.y || sample.max_variation_along(&[1]) <= CLASSIFY_TOLERANCE;
    let independent_of_z = !usage.uses_z() || sample.max_variation_along(&z_axes) <= CLASSIFY_TOLERANCE;

    let ts = if usage.t { linspace(0.0, domain.horizon, domain.points) } else { vec![0.0] };
    let mut ys = if usage.y { linspace(domain.y_min, domain.y_max, domain.points) } else { Vec::new() };
    ys.push(0.0);
    let zero = vec![0.0; dim_z];
    let zero_at_origin = ts.iter().all(|&t| expr.eval(t, 0.0, &zero).abs() <= CLASSIFY_TOLERANCE);
    let zero_on_y_axis = zero_at_origin
        && ts.iter().all(|&t| ys.iter().all(|&y| expr.eval(t, y, &zero).abs() <= CLASSIFY_TOLERANCE));
    Ok(GeneratorFlags { independent_of_y, independent_of_z, zero_at_origin, zero_on_y_axis })
}

/// Rejects division nodes whose denominator vanishes or changes sign on the grid.
pub(crate) fn check_division_hazards(ast: &Expr, dim_z: usize, domain: &ValidationDomain) -> Result<(), DslError> {
    for denom in ast.denominators() {
        let sample = GridSample::collect(denom, dim_z, domain, domain.points.max(2));
        let hazard = match sample {
            Err(_) => true,
            Ok(s) => {
                let min_abs = s.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                let has_neg = s.values.iter().any(|&v| v < 0.0);
                let has_pos = s.values.iter().any(|&v| v > 0.0);
                min_abs <= CLASSIFY_TOLERANCE || (has_neg && has_pos)
            }
        };
        if hazard {
            return Err(DslError::DivisionHazard { denominator: denom.to_string() });
        }
    }
    Ok(())
}

/// A validated generator together with its grid evidence.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    source: String,
    expr: GeneratorExpr,
    mu_hat: f64,
    flags: GeneratorFlags,
    domain: ValidationDomain,
}

impl GeneratorSpec {
    pub fn new(expr: GeneratorExpr, domain: ValidationDomain) -> Result<Self, DslError> {
        let lip = estimate_lipschitz(&expr, &domain)?;
        let flags = classify_generator(&expr, &domain)?;
        Ok(GeneratorSpec { source: expr.to_string(), expr, mu_hat: lip.mu_hat, flags, domain })
    }

    /// Parses with the default validation box for horizon `T = 1`.
    pub fn parse(source: &str, dim_z: usize) -> Result<Self, DslError> {
        Self::parse_with_domain(source, dim_z, ValidationDomain::default())
    }

    pub fn parse_with_domain(source: &str, dim_z: usize, domain: ValidationDomain) -> Result<Self, DslError> {
        let ast = super::parse_expr(source, super::VarSet::Generator { dim_z })?;
        let expr = GeneratorExpr::with_domain(ast, dim_z, &domain)?;
        let mut spec = Self::new(expr, domain)?;
        spec.source = source.trim().to_string();
        Ok(spec)
    }

    /// Source text as given (or the printed tree when built from an AST).
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &GeneratorExpr {
        &self.expr
    }

    pub fn dim_z(&self) -> usize {
        self.expr.dim_z()
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn flags(&self) -> GeneratorFlags {
        self.flags
    }

    pub fn domain(&self) -> &ValidationDomain {
        &self.domain
    }

    pub fn usage(&self) -> VarUsage {
        self.expr.ast().usage()
    }

    #[inline]
    pub fn eval(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        self.expr.eval(t, y, z)
    }

    /// Scalar-`z` shorthand used by the one-dimensional solvers.
    #[inline]
    pub fn eval1(&self, t: f64, y: f64, z: f64) -> f64 {
        self.expr.eval(t, y, std::slice::from_ref(&z))
    }
}
