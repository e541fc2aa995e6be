use serde::{Deserialize, Serialize};

use super::{SolveError, SpaceGrid};
use crate::dsl::Expr;
use crate::function::{ScalarFunction, TabulatedFunction};

/// Polynomial growth `|phi(x)| <= c (1 + |x|^m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub c: f64,
    pub m: f64,
}

impl GrowthBound {
    pub fn bound(&self, x: f64) -> f64 {
        self.c * (1.0 + x.abs().powf(self.m))
    }
}

const FIT_HALF_WIDTH: f64 = 50.0;
const FIT_POINTS: usize = 2001;
/// Factor on the sampled constant so the bound also covers points between samples.
const FIT_SLACK: f64 = 2.0;

/// Terminal data `phi(W_T)` with a growth bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec {
    phi: ScalarFunction,
    growth: GrowthBound,
}

impl PayoffSpec {
    /// Fits a constant on `[-50, 50]` for an even exponent, starting at 2 and
    /// raised while the payoff outgrows it.
    pub fn new(phi: ScalarFunction) -> Self {
        let xs: Vec<f64> = (0..FIT_POINTS)
            .map(|i| crate::function::node(-FIT_HALF_WIDTH, FIT_HALF_WIDTH, FIT_POINTS, i))
            .collect();
        let fit = |m: f64| {
            xs.iter()
                .map(|&x| phi.value(x).abs() / (1.0 + x.abs().powf(m)))
                .fold(0.0_f64, f64::max)
        };
        // The ratio |phi| / (1 + |x|^m) still growing between |x| = 25 and 50
        // means the exponent is too small.
        let ratio = |x: f64, m: f64| phi.value(x).abs().max(phi.value(-x).abs()) / (1.0 + x.powf(m));
        let mut m = 2.0;
        while m < 8.0 && ratio(FIT_HALF_WIDTH, m) > 1.5 * ratio(FIT_HALF_WIDTH / 2.0, m) + 1e-12 {
            m += 2.0;
        }
        let c = fit(m).max(f64::MIN_POSITIVE) * FIT_SLACK;
        PayoffSpec { phi, growth: GrowthBound { c, m } }
    }

    /// Payoff with a declared bound, verified on the default fit interval.
    pub fn with_growth(phi: ScalarFunction, growth: GrowthBound) -> Result<Self, SolveError> {
        let spec = PayoffSpec { phi, growth };
        let grid = SpaceGrid::new(-FIT_HALF_WIDTH, FIT_HALF_WIDTH, FIT_POINTS)?;
        spec.verify_growth(&grid)?;
        Ok(spec)
    }

    pub fn parse(source: &str) -> Result<Self, crate::function::FunctionError> {
        Ok(Self::new(ScalarFunction::parse(source)?))
    }

    pub fn phi(&self) -> &ScalarFunction {
        &self.phi
    }

    pub fn growth(&self) -> GrowthBound {
        self.growth
    }

    pub fn value(&self, x: f64) -> f64 {
        self.phi.value(x)
    }

    pub fn verify_growth(&self, grid: &SpaceGrid) -> Result<(), SolveError> {
        for j in 0..grid.n {
            let x = grid.x(j);
            let value = self.phi.value(x);
            let bound = self.growth.bound(x);
            if !value.is_finite() || value.abs() > bound * (1.0 + 1e-12) {
                return Err(SolveError::GrowthBoundViolated { x, value, bound });
            }
        }
        Ok(())
    }
}

/// `phi` with its argument clamped to `[anchor - level, anchor + level]`.
pub fn truncate_payoff(payoff: &PayoffSpec, level: f64, anchor: f64) -> Result<PayoffSpec, SolveError> {
    if !(level > 0.0) || !anchor.is_finite() {
        return Err(SolveError::InvalidInput(format!("truncation level {level} must be positive")));
    }
    let (lo, hi) = (anchor - level, anchor + level);
    let phi = match payoff.phi() {
        ScalarFunction::Symbolic(s) => {
            let clamp = Expr::Max(
                Box::new(Expr::constant(lo)),
                Box::new(Expr::Min(Box::new(Expr::Y), Box::new(Expr::constant(hi)))),
            );
            ScalarFunction::from_expr(s.expr().substitute_y(&clamp))
                .map_err(|e| SolveError::InvalidInput(e.to_string()))?
        }
        ScalarFunction::Tabulated(t) => {
            // Same spacing, widened so both flat tails are represented by two nodes.
            let step = t.step();
            let start = t.y_min().min(lo) - step;
            let end = t.y_max().max(hi) + step;
            let n = ((end - start) / step).ceil() as usize + 1;
            let values = (0..n).map(|i| t.value((start + step * i as f64).clamp(lo, hi))).collect();
            ScalarFunction::Tabulated(
                TabulatedFunction::new(start, step, values).map_err(|e| SolveError::InvalidInput(e.to_string()))?,
            )
        }
    };
    let growth = payoff.growth();
    Ok(PayoffSpec { phi, growth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_growth_for_square() {
        let p = PayoffSpec::parse("x*x").unwrap();
        assert_eq!(p.growth().m, 2.0);
        assert!(p.growth().c <= FIT_SLACK + 1e-6);
        p.verify_growth(&SpaceGrid::new(-40.0, 40.0, 101).unwrap()).unwrap();
    }

    #[test]
    fn quartic_needs_higher_exponent() {
        let p = PayoffSpec::parse("x*x*x*x").unwrap();
        assert_eq!(p.growth().m, 4.0);
    }

    #[test]
    fn declared_bound_is_checked() {
        let phi = ScalarFunction::parse("x*x").unwrap();
        let err = PayoffSpec::with_growth(phi, GrowthBound { c: 1.0, m: 1.0 }).unwrap_err();
        assert!(matches!(err, SolveError::GrowthBoundViolated { .. }));
    }

    #[test]
    fn truncation_clamps_argument() {
        let p = PayoffSpec::parse("x*x").unwrap();
        let t = truncate_payoff(&p, 5.0, 0.0).unwrap();
        assert_eq!(t.value(10.0), 25.0);
        assert_eq!(t.value(3.0), 9.0);
        assert_eq!(t.value(-7.0), 25.0);
        let shifted = truncate_payoff(&p, 1.0, 2.0).unwrap();
        assert_eq!(shifted.value(0.0), 1.0);
    }

    #[test]
    fn truncation_of_table_has_flat_tails() {
        let phi = ScalarFunction::tabulate_fn(-2.0, 2.0, 41, |x| x * x).unwrap();
        let t = truncate_payoff(&PayoffSpec::new(phi), 1.0, 0.0).unwrap();
        assert!((t.value(0.5) - 0.25).abs() < 1e-12);
        assert!((t.value(1.7) - 1.0).abs() < 1e-12);
        assert!((t.value(9.0) - 1.0).abs() < 1e-12);
    }
}
