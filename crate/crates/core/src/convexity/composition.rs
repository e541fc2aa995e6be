use serde::{Deserialize, Serialize};

use super::affine::{pi_a_membership, AffinePair};
use super::scan::{scan_extremes, Extremes, Scan};
use super::shape::{check_shape, tabulate_for_scan, ConvexityVerdict, Decision, Method, Mode, ScanReport};
use super::{tau_kink, tau_tabulated, ConvexityError, TAU_SYMBOLIC};
use crate::dsl::GeneratorSpec;
use crate::function::{Jet, ScalarFunction};

/// Which closure rule justifies `h ∘ psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionCase {
    /// `psi` g-affine, `h` g-convex.
    AffineInner,
    /// `h` g-convex and nondecreasing, `psi` g-convex.
    IncreasingOuter,
}

fn require_convex(gen: &GeneratorSpec, f: &ScalarFunction, name: &str, scan: &Scan) -> Result<(), ConvexityError> {
    let v = check_shape(gen, f, Mode::Convex, scan)?;
    if v.decision != Decision::GConvex {
        return Err(ConvexityError::HypothesisNotVerified(format!(
            "{name} = {f} is not g-convex: L_g = {} at (t={}, y={})",
            v.min_margin, v.witness.t, v.witness.y
        )));
    }
    Ok(())
}

/// Range of `psi` over the scan's `y` values.
fn image_range(psi: &ScalarFunction, scan: &Scan) -> (f64, f64) {
    scan.ys().iter().map(|&y| psi.value(y)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Checks `h ∘ psi` after verifying the hypotheses of the chosen case.
pub fn check_composition(
    gen: &GeneratorSpec,
    h: &ScalarFunction,
    psi: &ScalarFunction,
    case: CompositionCase,
    scan: &Scan,
) -> Result<ConvexityVerdict, ConvexityError> {
    scan.validate()?;
    require_convex(gen, h, "h", scan)?;
    match case {
        CompositionCase::AffineInner => {
            let sym = psi
                .as_symbolic()
                .filter(|s| s.second_derivative().is_some())
                .ok_or_else(|| ConvexityError::HypothesisNotVerified(format!("psi = {psi} is not a smooth expression")))?;
            let d2 = sym.second_derivative().expect("smooth");
            if scan.ys().iter().any(|&y| d2.eval_scalar(y).abs() > TAU_SYMBOLIC) {
                return Err(ConvexityError::HypothesisNotVerified(format!("psi = {psi} is not affine")));
            }
            let pair = AffinePair::new(sym.first_derivative().expect("smooth").eval_scalar(0.0), psi.value(0.0));
            let m = pi_a_membership(gen, pair, scan)?;
            if !m.member {
                return Err(ConvexityError::HypothesisNotVerified(format!(
                    "({}, {}) is not in the affine set: defect {} at z={:?}",
                    pair.a, pair.b, m.margin, m.witness.z
                )));
            }
        }
        CompositionCase::IncreasingOuter => {
            require_convex(gen, psi, "psi", scan)?;
            let (lo, hi) = image_range(psi, scan);
            let n = 1001;
            let mut prev = h.value(lo);
            for i in 1..n {
                let y = crate::function::node(lo, hi, n, i);
                let v = h.value(y);
                if v < prev - TAU_SYMBOLIC {
                    return Err(ConvexityError::HypothesisNotVerified(format!(
                        "h = {h} decreases near y={y} on the range of psi"
                    )));
                }
                prev = v;
            }
        }
    }
    let (lo, hi) = image_range(psi, scan);
    let composed = h.compose(psi, lo.min(scan.y_min), hi.max(scan.y_max), 2 * scan.y_points + 1)?;
    check_shape(gen, &composed, Mode::Convex, scan)
}

/// Jets of `h` at scan nodes where second derivatives exist, with the
/// tolerance appropriate to how they were obtained.
fn jets_on_scan(h: &ScalarFunction, scan: &Scan) -> Result<(Vec<f64>, Vec<Jet>, f64), ConvexityError> {
    if h.as_symbolic().and_then(|s| s.second_derivative()).is_some() {
        let ys = scan.ys();
        let jets = ys.iter().map(|&y| h.jet(y)).collect::<Result<Vec<_>, _>>()?;
        return Ok((ys, jets, TAU_SYMBOLIC));
    }
    let table = match h {
        ScalarFunction::Tabulated(t) => t.clone(),
        _ => tabulate_for_scan(h, scan)?,
    };
    let step = table.step();
    let (mut ys, mut jets) = (Vec::new(), Vec::new());
    for i in 1..table.len().saturating_sub(1) {
        let y = table.y_at(i);
        if y < scan.y_min - 1e-9 * step || y > scan.y_max + 1e-9 * step {
            continue;
        }
        let (l, r) = table.one_sided_slopes(i).expect("interior");
        if (r - l).abs() <= tau_kink(step) {
            ys.push(y);
            jets.push(table.jet_at(i).expect("interior"));
        }
    }
    if ys.len() < 10 {
        return Err(ConvexityError::GridTooCoarse { valid: ys.len() });
    }
    Ok((ys, jets, tau_tabulated(step)))
}

/// For `z`-free generators: `h'' >= 0` and `g(t, h(y)) - h'(y) g(t, y) >= 0` on the `(t, y)` scan.
pub fn special_case_z_independent(
    gen: &GeneratorSpec,
    h: &ScalarFunction,
    scan: &Scan,
) -> Result<ConvexityVerdict, ConvexityError> {
    scan.validate()?;
    if !gen.flags().independent_of_z {
        return Err(ConvexityError::PreconditionFailed(format!("generator {} depends on z", gen.source())));
    }
    let (ys, jets, tau) = jets_on_scan(h, scan)?;
    let z0 = vec![0.0; gen.dim_z()];
    let zs = vec![z0.clone()];
    let ineq = scan_extremes(&scan.times, &ys, &zs, |t, i, z| {
        Some(gen.eval(t, jets[i].value, z) - jets[i].d1 * gen.eval(t, ys[i], z))
    })
    .expect("nonempty scan");
    let curvature = scan_extremes(&scan.times[..1], &ys, &zs, |_, i, _| Some(jets[i].d2)).expect("nonempty scan");
    let ext = Extremes::merge(Some(ineq), Some(Extremes { max: f64::NEG_INFINITY, ..curvature }))
        .expect("both present");
    let decision = if ext.min >= -tau { Decision::GConvex } else { Decision::Neither };
    Ok(ConvexityVerdict {
        decision,
        mode: Mode::Convex,
        min_margin: ext.min,
        max_margin: ext.max,
        witness: ext.min_at.clone(),
        min_witness: ext.min_at,
        max_witness: ext.max_at,
        scan: ScanReport {
            times: scan.times.clone(),
            y_min: scan.y_min,
            y_max: scan.y_max,
            y_points: scan.y_points,
            z_min: 0.0,
            z_max: 0.0,
            z_points: 1,
            dim_z: gen.dim_z(),
            evaluated: ext.count,
            method: if tau == TAU_SYMBOLIC { Method::Symbolic } else { Method::Nonsmooth },
            tolerance: tau,
            kinks_excluded: 0,
            second_difference: None,
        },
        certificate: decision == Decision::Neither,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeSign {
    /// `g(t, 0) > 0` somewhere: g-convex candidates have `h' <= 1`.
    Positive,
    /// `g(t, 0) < 0` somewhere: g-convex candidates have `h' >= 1`.
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeBoundVerdict {
    pub sign: SlopeSign,
    pub shape: ConvexityVerdict,
    /// `max h'` (positive case) or `min h'` (negative case) over the scan.
    pub extreme_slope: f64,
    pub slope_at: f64,
    /// False only when `h` is g-convex yet breaks the slope bound.
    pub consistent: bool,
}

/// For `y`-free generators with a signed `g(t, 0)`: g-convexity forces the
/// slope of `h` to one side of 1.
pub fn slope_bound_check(gen: &GeneratorSpec, h: &ScalarFunction, scan: &Scan) -> Result<SlopeBoundVerdict, ConvexityError> {
    scan.validate()?;
    if !gen.flags().independent_of_y {
        return Err(ConvexityError::PreconditionFailed(format!("generator {} depends on y", gen.source())));
    }
    let z0 = vec![0.0; gen.dim_z()];
    let at_zero: Vec<f64> = scan.times.iter().map(|&t| gen.eval(t, 0.0, &z0)).collect();
    let sign = if at_zero.iter().any(|&v| v > TAU_SYMBOLIC) {
        SlopeSign::Positive
    } else if at_zero.iter().any(|&v| v < -TAU_SYMBOLIC) {
        SlopeSign::Negative
    } else {
        return Err(ConvexityError::PreconditionFailed("g(t, 0) vanishes on every scanned time".into()));
    };
    let shape = check_shape(gen, h, Mode::Convex, scan)?;
    let (ys, jets, tau) = jets_on_scan(h, scan)?;
    let pick = |better: fn(f64, f64) -> bool| {
        ys.iter().zip(&jets).fold((jets[0].d1, ys[0]), |acc, (&y, j)| if better(j.d1, acc.0) { (j.d1, y) } else { acc })
    };
    let (extreme_slope, slope_at, within) = match sign {
        SlopeSign::Positive => {
            let (s, y) = pick(|a, b| a > b);
            (s, y, s <= 1.0 + tau)
        }
        SlopeSign::Negative => {
            let (s, y) = pick(|a, b| a < b);
            (s, y, s >= 1.0 - tau)
        }
    };
    let consistent = shape.decision != Decision::GConvex || within;
    Ok(SlopeBoundVerdict { sign, shape, extreme_slope, slope_at, consistent })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(src: &str) -> GeneratorSpec {
        GeneratorSpec::parse(src, 1).unwrap()
    }

    fn h(src: &str) -> ScalarFunction {
        ScalarFunction::parse(src).unwrap()
    }

    fn scan() -> Scan {
        Scan::default_for(1.0, 1)
    }

    #[test]
    fn affine_inner_composition() {
        let v = check_composition(&gen("abs(z1)"), &h("y*y"), &h("2*y + 3"), CompositionCase::AffineInner, &scan())
            .unwrap();
        assert_eq!(v.decision, Decision::GConvex);
        let err = check_composition(&gen("abs(z1)"), &h("y*y"), &h("-y"), CompositionCase::AffineInner, &scan())
            .unwrap_err();
        assert!(matches!(err, ConvexityError::HypothesisNotVerified(_)));
    }

    #[test]
    fn increasing_outer_composition() {
        let v = check_composition(&gen("0"), &h("max(y, 0)"), &h("y*y"), CompositionCase::IncreasingOuter, &scan())
            .unwrap();
        assert_eq!(v.decision, Decision::GConvex);
        let err = check_composition(&gen("0"), &h("y*y"), &h("y"), CompositionCase::IncreasingOuter, &scan());
        assert!(matches!(err, Err(ConvexityError::HypothesisNotVerified(_))));
    }

    #[test]
    fn identity_inner() {
        let v = check_composition(&gen("abs(z1)"), &h("abs(y)"), &h("y"), CompositionCase::AffineInner, &scan()).unwrap();
        assert_eq!(v.decision, Decision::GConvex);
    }

    #[test]
    fn z_free_special_case() {
        let v = special_case_z_independent(&gen("y"), &h("y*y"), &scan()).unwrap();
        assert_eq!(v.decision, Decision::Neither);
        assert_eq!(v.min_margin, -(v.witness.y * v.witness.y));
        let v = special_case_z_independent(&gen("y"), &h("y"), &scan()).unwrap();
        assert_eq!(v.decision, Decision::GConvex);
        assert_eq!(v.min_margin, 0.0);
        let v = special_case_z_independent(&gen("-y"), &h("y*y"), &scan()).unwrap();
        assert_eq!(v.decision, Decision::GConvex);
        assert!(special_case_z_independent(&gen("abs(z1)"), &h("y"), &scan()).is_err());
    }

    #[test]
    fn slope_bounds() {
        let r = slope_bound_check(&gen("abs(z1) + 1"), &h("0.5*y"), &scan()).unwrap();
        assert_eq!(r.sign, SlopeSign::Positive);
        assert_eq!(r.shape.decision, Decision::GConvex);
        assert!((r.shape.min_margin - 0.5).abs() < 1e-12);
        assert!(r.consistent);
        let r = slope_bound_check(&gen("abs(z1) + 1"), &h("2*y"), &scan()).unwrap();
        assert_eq!(r.shape.decision, Decision::Neither);
        assert!((r.shape.min_margin + 1.0).abs() < 1e-12);
        assert!(r.consistent);
        let err = slope_bound_check(&gen("abs(z1)"), &h("y"), &scan()).unwrap_err();
        assert!(matches!(err, ConvexityError::PreconditionFailed(_)));
    }
}
