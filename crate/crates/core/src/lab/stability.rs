use serde::Serialize;

use super::LabError;
use crate::convexity::{check_shape, Decision, Mode, Scan};
use crate::dsl::GeneratorSpec;
use crate::function::ScalarFunction;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub verdicts: Vec<Decision>,
    pub limit: Decision,
    /// `sup |h_k - h|` over the scan's `y` grid.
    pub distances: Vec<f64>,
    pub monotone: bool,
    /// Every member and the limit are g-convex.
    pub shared_verdict: bool,
}

/// `sqrt(y^2 + 1/k)` tabulated with `n` nodes on `[lo, hi]`.
pub fn smoothed_abs_sequence(ks: &[u32], lo: f64, hi: f64, n: usize) -> Result<Vec<ScalarFunction>, LabError> {
    ks.iter()
        .map(|&k| {
            let eps = 1.0 / f64::from(k);
            Ok(ScalarFunction::tabulate_fn(lo, hi, n, |y| (y * y + eps).sqrt())?)
        })
        .collect()
}

/// Verdicts along a sequence converging to `limit`, with the sup-distances.
pub fn stability_suite(
    gen: &GeneratorSpec,
    sequence: &[ScalarFunction],
    limit: &ScalarFunction,
    scan: &Scan,
) -> Result<StabilityReport, LabError> {
    let verdicts = sequence
        .iter()
        .map(|h| Ok(check_shape(gen, h, Mode::Convex, scan)?.decision))
        .collect::<Result<Vec<_>, LabError>>()?;
    let limit_verdict = check_shape(gen, limit, Mode::Convex, scan)?.decision;
    let ys = scan.ys();
    let distances: Vec<f64> = sequence
        .iter()
        .map(|h| ys.iter().map(|&y| (h.value(y) - limit.value(y)).abs()).fold(0.0, f64::max))
        .collect();
    let monotone = distances.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let shared_verdict =
        limit_verdict == Decision::GConvex && verdicts.iter().all(|&d| d == Decision::GConvex);
    Ok(StabilityReport { verdicts, limit: limit_verdict, distances, monotone, shared_verdict })
}
