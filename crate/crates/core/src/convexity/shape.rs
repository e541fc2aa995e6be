use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::operator::l_g_from_jet;
use super::scan::{scan_extremes, Extremes, Scan, Witness};
use super::{tau_kink, tau_tabulated, ConvexityError, TAU_SYMBOLIC};
use crate::dsl::GeneratorSpec;
use crate::function::{Jet, ScalarFunction, TabulatedFunction};

/// Which inequality on `L_g h` is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Convex,
    Concave,
    Affine,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "convex" => Ok(Mode::Convex),
            "concave" => Ok(Mode::Concave),
            "affine" => Ok(Mode::Affine),
            other => Err(format!("unknown mode '{other}' (expected convex, concave or affine)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    GConvex,
    GConcave,
    GAffine,
    Neither,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::GConvex => "g_convex",
            Decision::GConcave => "g_concave",
            Decision::GAffine => "g_affine",
            Decision::Neither => "neither",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Exact derivatives of a C2 expression.
    Symbolic,
    /// Second-difference convexity test plus the operator at non-kink nodes.
    Nonsmooth,
}

/// What was scanned and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub times: Vec<f64>,
    pub y_min: f64,
    pub y_max: f64,
    pub y_points: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub z_points: usize,
    pub dim_z: usize,
    pub evaluated: usize,
    pub method: Method,
    pub tolerance: f64,
    pub kinks_excluded: usize,
    /// Extreme second difference quotient seen by the non-smooth path
    /// (minimum for convex and affine modes, maximum for concave).
    pub second_difference: Option<f64>,
}

/// Outcome of a shape scan. `witness` is the point whose margin decides the
/// mode: the minimiser for convex, the maximiser for concave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityVerdict {
    pub decision: Decision,
    pub mode: Mode,
    pub min_margin: f64,
    pub max_margin: f64,
    pub witness: Witness,
    pub min_witness: Witness,
    pub max_witness: Witness,
    pub scan: ScanReport,
    /// True when the verdict rests on an explicit violating point.
    pub certificate: bool,
}

impl ConvexityVerdict {
    /// A violation is a certificate; a pass is only absence of evidence on the scan.
    pub fn label(&self) -> &'static str {
        if self.certificate {
            "violated (witness)"
        } else {
            "no violation found on scan"
        }
    }

    pub fn holds(&self) -> bool {
        self.decision != Decision::Neither
    }
}

fn decide(mode: Mode, ext: &Extremes, tau: f64) -> (Decision, Witness) {
    let convex_ok = ext.min >= -tau;
    let concave_ok = ext.max <= tau;
    match mode {
        Mode::Convex => (if convex_ok { Decision::GConvex } else { Decision::Neither }, ext.min_at.clone()),
        Mode::Concave => (if concave_ok { Decision::GConcave } else { Decision::Neither }, ext.max_at.clone()),
        Mode::Affine => {
            let decision = if convex_ok && concave_ok { Decision::GAffine } else { Decision::Neither };
            let witness = if ext.max.abs() > ext.min.abs() { ext.max_at.clone() } else { ext.min_at.clone() };
            (decision, witness)
        }
    }
}

fn report(scan: &Scan, evaluated: usize, method: Method, tolerance: f64) -> ScanReport {
    ScanReport {
        times: scan.times.clone(),
        y_min: scan.y_min,
        y_max: scan.y_max,
        y_points: scan.y_points,
        z_min: scan.z_min,
        z_max: scan.z_max,
        z_points: scan.z_points,
        dim_z: scan.dim_z,
        evaluated,
        method,
        tolerance,
        kinks_excluded: 0,
        second_difference: None,
    }
}

fn verdict(mode: Mode, ext: Extremes, scan: ScanReport) -> ConvexityVerdict {
    let (decision, witness) = decide(mode, &ext, scan.tolerance);
    ConvexityVerdict {
        decision,
        mode,
        min_margin: ext.min,
        max_margin: ext.max,
        witness,
        min_witness: ext.min_at,
        max_witness: ext.max_at,
        scan,
        certificate: decision == Decision::Neither,
    }
}

fn check_scan(gen: &GeneratorSpec, scan: &Scan) -> Result<(), ConvexityError> {
    scan.validate()?;
    if scan.dim_z != gen.dim_z() {
        return Err(ConvexityError::DimensionMismatch { expected: gen.dim_z(), got: scan.dim_z });
    }
    Ok(())
}

/// Table of a non-smooth symbolic candidate whose interior nodes are the scan's `y` values.
pub(crate) fn tabulate_for_scan(h: &ScalarFunction, scan: &Scan) -> Result<TabulatedFunction, ConvexityError> {
    let step = scan.y_step();
    if scan.y_points < 3 || step <= 0.0 {
        return Err(ConvexityError::GridTooCoarse { valid: scan.y_points });
    }
    let mut ys = Vec::with_capacity(scan.y_points + 2);
    ys.push(scan.y_min - step);
    ys.extend(scan.ys());
    ys.push(scan.y_max + step);
    let values = ys.into_iter().map(|y| h.value(y)).collect();
    Ok(TabulatedFunction::new(scan.y_min - step, step, values)?)
}

/// Decides the shape of `h` under `g` on the scan. Non-smooth candidates are
/// routed through [`check_nonsmooth`].
pub fn check_shape(
    gen: &GeneratorSpec,
    h: &ScalarFunction,
    mode: Mode,
    scan: &Scan,
) -> Result<ConvexityVerdict, ConvexityError> {
    check_scan(gen, scan)?;
    let sym = match h {
        ScalarFunction::Tabulated(t) => return check_nonsmooth_mode(gen, t, mode, scan),
        ScalarFunction::Symbolic(s) if s.first_derivative().is_none() => {
            let table = tabulate_for_scan(h, scan)?;
            return check_nonsmooth_mode(gen, &table, mode, scan);
        }
        ScalarFunction::Symbolic(s) => s,
    };
    let (d1, d2) = (sym.first_derivative().expect("C2"), sym.second_derivative().expect("C2"));
    let ys = scan.ys();
    let jets: Vec<Jet> = ys
        .iter()
        .map(|&y| Jet { value: sym.expr().eval_scalar(y), d1: d1.eval_scalar(y), d2: d2.eval_scalar(y) })
        .collect();
    let zs = scan.z_vectors();
    let ext = scan_extremes(&scan.times, &ys, &zs, |t, i, z| Some(l_g_from_jet(gen, jets[i], t, ys[i], z)))
        .expect("nonempty scan");
    let rep = report(scan, ext.count, Method::Symbolic, TAU_SYMBOLIC);
    Ok(verdict(mode, ext, rep))
}

/// Smallest and largest second difference quotient of `table` over nodes
/// with `y` in `[lo, hi]`, with their locations.
pub fn second_difference_test(table: &TabulatedFunction, lo: f64, hi: f64) -> Option<((f64, f64), (f64, f64))> {
    let step = table.step();
    let v = table.values();
    let mut min: Option<(f64, f64)> = None;
    let mut max: Option<(f64, f64)> = None;
    for i in 1..v.len().saturating_sub(1) {
        let y = table.y_at(i);
        if y < lo - 1e-9 * step || y > hi + 1e-9 * step {
            continue;
        }
        let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (step * step);
        if min.is_none_or(|(m, _)| d2 < m) {
            min = Some((d2, y));
        }
        if max.is_none_or(|(m, _)| d2 > m) {
            max = Some((d2, y));
        }
    }
    Some((min?, max?))
}

/// Criterion for continuous tabulated candidates: classical convexity through
/// second differences, then `L_g h >= 0` at nodes where `h''` exists.
pub fn check_nonsmooth(
    gen: &GeneratorSpec,
    h: &TabulatedFunction,
    scan: &Scan,
) -> Result<ConvexityVerdict, ConvexityError> {
    check_scan(gen, scan)?;
    check_nonsmooth_mode(gen, h, Mode::Convex, scan)
}

fn check_nonsmooth_mode(
    gen: &GeneratorSpec,
    table: &TabulatedFunction,
    mode: Mode,
    scan: &Scan,
) -> Result<ConvexityVerdict, ConvexityError> {
    let step = table.step();
    let tau = tau_tabulated(step);
    let kink = tau_kink(step);
    let lo = scan.y_min - 1e-9 * step;
    let hi = scan.y_max + 1e-9 * step;
    let z0 = vec![0.0; scan.dim_z];
    let t0 = scan.times[0];

    // Step 1: second differences, reported as margins at z = 0.
    let ((sd_min, y_min), (sd_max, y_max)) =
        second_difference_test(table, lo, hi).ok_or(ConvexityError::GridTooCoarse { valid: 0 })?;
    let step1 = Extremes {
        min: sd_min,
        min_at: Witness { t: t0, y: y_min, z: z0.clone() },
        max: sd_max,
        max_at: Witness { t: t0, y: y_max, z: z0 },
        count: 0,
    };
    let step1 = match mode {
        // Only the relevant side of the second-difference test constrains the mode.
        Mode::Convex => Extremes { max: f64::NEG_INFINITY, ..step1 },
        Mode::Concave => Extremes { min: f64::INFINITY, ..step1 },
        Mode::Affine => step1,
    };

    // Step 2: operator at non-kink interior nodes.
    let mut ys = Vec::new();
    let mut jets = Vec::new();
    let mut kinks = 0;
    for i in 1..table.len().saturating_sub(1) {
        let y = table.y_at(i);
        if y < lo || y > hi {
            continue;
        }
        let (left, right) = table.one_sided_slopes(i).expect("interior node");
        if (right - left).abs() > kink {
            kinks += 1;
            continue;
        }
        ys.push(y);
        jets.push(table.jet_at(i).expect("interior node"));
    }
    if ys.len() < 10 {
        return Err(ConvexityError::GridTooCoarse { valid: ys.len() });
    }
    let zs = scan.z_vectors();
    let step2 = scan_extremes(&scan.times, &ys, &zs, |t, i, z| Some(l_g_from_jet(gen, jets[i], t, ys[i], z)))
        .expect("nonempty scan");
    let evaluated = step2.count;
    let ext = Extremes::merge(Some(step2), Some(step1)).expect("both present");

    let mut rep = report(scan, evaluated, Method::Nonsmooth, tau);
    rep.y_min = scan.y_min.max(table.y_min());
    rep.y_max = scan.y_max.min(table.y_max());
    rep.kinks_excluded = kinks;
    rep.second_difference = Some(if mode == Mode::Concave { sd_max } else { sd_min });
    Ok(verdict(mode, ext, rep))
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
    fn square_under_abs_z() {
        let v = check_shape(&gen("abs(z1)"), &h("y*y"), Mode::Convex, &scan()).unwrap();
        assert_eq!(v.decision, Decision::GConvex);
        assert_eq!(v.min_margin, 0.0);
        assert_eq!(v.witness.z, vec![0.0]);
        assert!(!v.certificate);
    }

    #[test]
    fn square_under_linear_y_fails() {
        let v = check_shape(&gen("y"), &h("y*y"), Mode::Convex, &scan()).unwrap();
        assert_eq!(v.decision, Decision::Neither);
        assert!(v.certificate);
        assert_eq!(v.witness.z, vec![0.0]);
        assert_eq!(v.min_margin, -(v.witness.y * v.witness.y));
    }

    #[test]
    fn negative_square_not_concave_under_abs_z() {
        let v = check_shape(&gen("abs(z1)"), &h("-(y*y)"), Mode::Concave, &scan()).unwrap();
        assert_eq!(v.decision, Decision::Neither);
        assert!(v.witness.y > 0.0);
        assert!(v.max_margin > 0.0);
    }

    #[test]
    fn minus_identity_convex_not_concave() {
        let g = gen("abs(z1)");
        assert_eq!(check_shape(&g, &h("-y"), Mode::Convex, &scan()).unwrap().decision, Decision::GConvex);
        let v = check_shape(&g, &h("-y"), Mode::Concave, &scan()).unwrap();
        assert_eq!(v.decision, Decision::Neither);
        assert_eq!(v.max_margin, 10.0);
    }

    #[test]
    fn affine_mode() {
        let g = gen("abs(z1)");
        assert_eq!(check_shape(&g, &h("2*y + 3"), Mode::Affine, &scan()).unwrap().decision, Decision::GAffine);
        assert_eq!(check_shape(&g, &h("-y"), Mode::Affine, &scan()).unwrap().decision, Decision::Neither);
    }

    #[test]
    fn nonsmooth_abs() {
        let table = TabulatedFunction::sample(-6.0, 6.0, 1201, f64::abs).unwrap();
        let v = check_nonsmooth(&gen("abs(z1)"), &table, &scan()).unwrap();
        assert_eq!(v.decision, Decision::GConvex, "{v:?}");
        assert_eq!(v.scan.method, Method::Nonsmooth);
        assert_eq!(v.scan.kinks_excluded, 1);
        let v = check_nonsmooth(&gen("-abs(z1)"), &table, &scan()).unwrap();
        assert_eq!(v.decision, Decision::Neither);
        assert!(v.witness.y < 0.0);
        let v = check_nonsmooth(&gen("0"), &table, &scan()).unwrap();
        assert_eq!(v.decision, Decision::GConvex);
    }

    #[test]
    fn symbolic_kinked_candidate_takes_nonsmooth_path() {
        let v = check_shape(&gen("abs(z1)"), &h("abs(y)"), Mode::Convex, &scan()).unwrap();
        assert_eq!(v.decision, Decision::GConvex);
        assert_eq!(v.scan.method, Method::Nonsmooth);
        let v = check_shape(&gen("-abs(z1)"), &h("abs(y)"), Mode::Convex, &scan()).unwrap();
        assert_eq!(v.decision, Decision::Neither);
        assert!(v.witness.y < 0.0);
    }

    #[test]
    fn nonconvex_table_fails_step_one() {
        let table = TabulatedFunction::sample(-6.0, 6.0, 601, |y| -y.abs()).unwrap();
        let v = check_nonsmooth(&gen("0"), &table, &scan()).unwrap();
        assert_eq!(v.decision, Decision::Neither);
        assert!(v.scan.second_difference.unwrap() < 0.0);
    }

    #[test]
    fn coarse_table_is_rejected() {
        let table = TabulatedFunction::sample(-1.0, 1.0, 5, |y| y * y).unwrap();
        let err = check_nonsmooth(&gen("0"), &table, &scan()).unwrap_err();
        assert!(matches!(err, ConvexityError::GridTooCoarse { .. }));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("concave".parse::<Mode>().unwrap(), Mode::Concave);
        assert!("other".parse::<Mode>().is_err());
    }
}
