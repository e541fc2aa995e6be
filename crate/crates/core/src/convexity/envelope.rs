use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::affine::{pi_v_membership, AffinePair};
use super::scan::Scan;
use super::shape::{check_nonsmooth, check_shape, ConvexityVerdict, Decision, Mode};
use super::{ConvexityError, TAU_SYMBOLIC};
use crate::dsl::GeneratorSpec;
use crate::function::{node, ScalarFunction, TabulatedFunction};

/// Uniform grid of `n` points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl YGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        YGrid { lo, hi, n }
    }

    /// 401 points over the scan's `y` range.
    pub fn for_scan(scan: &Scan) -> Self {
        YGrid { lo: scan.y_min, hi: scan.y_max, n: 401 }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| node(self.lo, self.hi, self.n, i)).collect()
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    fn validate(&self) -> Result<(), ConvexityError> {
        if self.n < 3 || !(self.hi > self.lo) {
            return Err(ConvexityError::InvalidScan(format!("y grid [{}, {}] with {} points", self.lo, self.hi, self.n)));
        }
        Ok(())
    }
}

/// Candidate slopes for affine minorants.
pub type SlopeGrid = YGrid;

/// 401 slopes over `±(max secant slope + 1)` of `phi` on the grid.
fn default_slopes(values: &[f64], step: f64) -> SlopeGrid {
    let s = values.windows(2).map(|w| ((w[1] - w[0]) / step).abs()).fold(0.0, f64::max) + 1.0;
    YGrid { lo: -s, hi: s, n: 401 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub function: TabulatedFunction,
    /// Minorants `(a, b*(a))` admitted by `Π_g^v`.
    pub kept: Vec<AffinePair>,
    pub slopes_tried: usize,
    /// `max (f - phi)` on the grid; at most rounding.
    pub max_excess: f64,
}

/// Supremum of the affine minorants of `phi` whose coefficients lie in `Π_g^v`.
pub fn g_convex_envelope(
    gen: &GeneratorSpec,
    phi: &ScalarFunction,
    y_grid: &YGrid,
    slopes: Option<&SlopeGrid>,
    scan: &Scan,
) -> Result<Envelope, ConvexityError> {
    y_grid.validate()?;
    let ys = y_grid.points();
    let values: Vec<f64> = ys.iter().map(|&y| phi.value(y)).collect();
    let slopes = slopes.copied().unwrap_or_else(|| default_slopes(&values, y_grid.step()));
    if slopes.n == 0 {
        return Err(ConvexityError::InvalidScan("empty slope grid".into()));
    }
    let candidates: Vec<AffinePair> = (0..slopes.n)
        .map(|k| {
            let a = node(slopes.lo, slopes.hi, slopes.n, k);
            let b = ys.iter().zip(&values).map(|(&y, &v)| v - a * y).fold(f64::INFINITY, f64::min);
            AffinePair::new(a, b)
        })
        .collect();
    let verdicts: Vec<Result<bool, ConvexityError>> =
        candidates.par_iter().map(|&p| pi_v_membership(gen, p, scan).map(|m| m.member)).collect();
    let mut kept = Vec::new();
    for (pair, v) in candidates.iter().zip(verdicts) {
        if v? {
            kept.push(*pair);
        }
    }
    if kept.is_empty() {
        return Err(ConvexityError::EmptyMinorantFamily);
    }
    let env: Vec<f64> =
        ys.iter().map(|&y| kept.iter().map(|p| p.apply(y)).fold(f64::NEG_INFINITY, f64::max)).collect();
    let max_excess = env.iter().zip(&values).map(|(f, v)| f - v).fold(f64::NEG_INFINITY, f64::max);
    let function = TabulatedFunction::new(y_grid.lo, y_grid.step(), env)?;
    Ok(Envelope { function, kept, slopes_tried: slopes.n, max_excess })
}

/// Pointwise maximum of g-convex functions dominated by `dominator`, tabulated
/// on `y_grid` and re-checked.
pub fn combine_sup(
    gen: &GeneratorSpec,
    family: &[ScalarFunction],
    dominator: Option<&ScalarFunction>,
    y_grid: &YGrid,
    scan: &Scan,
) -> Result<(TabulatedFunction, ConvexityVerdict), ConvexityError> {
    y_grid.validate()?;
    if family.is_empty() {
        return Err(ConvexityError::HypothesisNotVerified("empty family".into()));
    }
    let ys = y_grid.points();
    for (index, h) in family.iter().enumerate() {
        let v = check_shape(gen, h, Mode::Convex, scan)?;
        if v.decision != Decision::GConvex {
            return Err(ConvexityError::HypothesisNotVerified(format!(
                "member {index} ({h}) has L_g margin {} at y={}",
                v.min_margin, v.witness.y
            )));
        }
        if let Some(phi) = dominator {
            for &y in &ys {
                let excess = h.value(y) - phi.value(y);
                if excess > TAU_SYMBOLIC {
                    return Err(ConvexityError::DominationViolated { index, y, excess });
                }
            }
        }
    }
    let values = ys.iter().map(|&y| family.iter().map(|h| h.value(y)).fold(f64::NEG_INFINITY, f64::max)).collect();
    let table = TabulatedFunction::new(y_grid.lo, y_grid.step(), values)?;
    let verdict = check_nonsmooth(gen, &table, scan)?;
    Ok((table, verdict))
}
