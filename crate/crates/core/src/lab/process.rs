use serde::Serialize;

use super::jensen::GapLocation;
use super::{tol_solver, LabError};
use crate::bsde::{solve_pde, solve_pde_from_row, PayoffSpec, PdeConfig, Surface};
use crate::convexity::{check_shape, Decision, Mode, Scan};
use crate::dsl::GeneratorSpec;
use crate::function::ScalarFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessClass {
    GMartingale,
    GSubmartingale,
    GSupermartingale,
}

impl ProcessClass {
    /// Whether an observed class is compatible with this implied one.
    fn admits(self, observed: ProcessClass) -> bool {
        observed == self || observed == ProcessClass::GMartingale
    }

    fn admits_opt(self, observed: Option<ProcessClass>) -> bool {
        observed.is_some_and(|c| self.admits(c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessReport {
    pub class: ProcessClass,
    /// Extremes of `E^g_{s,t}[Y_t] - Y_s` over consecutive times and trusted nodes.
    pub min_discrepancy: f64,
    pub min_at: GapLocation,
    pub max_discrepancy: f64,
    pub max_at: GapLocation,
    pub tol: f64,
    pub times: Vec<f64>,
}

/// `{0, T/4, T/2, 3T/4, T}`.
pub fn default_times(horizon: f64) -> Vec<f64> {
    (0..=4).map(|i| horizon * i as f64 / 4.0).collect()
}

/// Classifies `Y` by the sign of `E^g_{s,t}[Y_t] - Y_s` for consecutive `s < t`
/// in `times`, each conditional expectation re-solved from the row at `t`.
pub fn classify_process(
    gen: &GeneratorSpec,
    u: &Surface,
    times: &[f64],
    tol: f64,
) -> Result<ProcessReport, LabError> {
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::Scenario(format!("times must be increasing with at least two entries: {times:?}")));
    }
    let origin = GapLocation { t: times[0], x: u.grid.x(0) };
    let (mut min, mut max) = ((f64::INFINITY, origin), (f64::NEG_INFINITY, origin));
    for w in times.windows(2) {
        let (s, t) = (w[0], w[1]);
        let v = solve_pde_from_row(gen, &u.slice_at(t)?, s, t, None)?;
        let base = u.row_at(s)?;
        for j in u.grid.interior_range(v.reach(0).max(u.reach_at(s)?)) {
            let d = v.values[0][j] - base[j];
            let at = GapLocation { t: s, x: u.grid.x(j) };
            if d < min.0 {
                min = (d, at);
            }
            if d > max.0 {
                max = (d, at);
            }
        }
    }
    if min.0 > max.0 {
        return Err(LabError::Solve(crate::bsde::SolveError::DomainTooSmall { t: times[0], x: u.grid.x(0) }));
    }
    let class = match (min.0 >= -tol, max.0 <= tol) {
        (true, true) => ProcessClass::GMartingale,
        (true, false) => ProcessClass::GSubmartingale,
        (false, true) => ProcessClass::GSupermartingale,
        (false, false) => {
            return Err(LabError::InconclusiveClassification {
                min: min.0,
                max: max.0,
                s_min: min.1.t,
                x_min: min.1.x,
                s_max: max.1.t,
                x_max: max.1.x,
                tol,
            })
        }
    };
    Ok(ProcessReport {
        class,
        min_discrepancy: min.0,
        min_at: min.1,
        max_discrepancy: max.0,
        max_at: max.1,
        tol,
        times: times.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformEntry {
    pub payoff: String,
    /// `None` when the discrepancies have both signs beyond tolerance.
    pub class: Option<ProcessClass>,
    pub min_discrepancy: f64,
    pub max_discrepancy: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformReport {
    pub h: String,
    pub convex: Decision,
    pub concave: Decision,
    /// Class implied by the verdicts; `None` when `h` is neither.
    pub implied: Option<ProcessClass>,
    pub entries: Vec<TransformEntry>,
    /// For `h` that is not g-convex: whether some transform fails to be a
    /// g-submartingale. Battery evidence only.
    pub inverse_evidence: Option<bool>,
    /// `certificate` when a class is implied, `evidence` otherwise.
    pub direction: String,
}

/// Classifies `h(Y)` for `Y = E^g_{t,T}[phi]` over a battery of payoffs and
/// compares with the class implied by the pointwise verdicts on `h`.
pub fn martingale_transform_suite(
    gen: &GeneratorSpec,
    h: &ScalarFunction,
    base_payoffs: &[PayoffSpec],
    horizon: f64,
    config: &PdeConfig,
    scan: &Scan,
) -> Result<TransformReport, LabError> {
    let convex = check_shape(gen, h, Mode::Convex, scan)?.decision;
    let concave = check_shape(gen, h, Mode::Concave, scan)?.decision;
    let implied = match (convex == Decision::GConvex, concave == Decision::GConcave) {
        (true, true) => Some(ProcessClass::GMartingale),
        (true, false) => Some(ProcessClass::GSubmartingale),
        (false, true) => Some(ProcessClass::GSupermartingale),
        (false, false) => None,
    };
    let times = default_times(horizon);
    let mut entries = Vec::with_capacity(base_payoffs.len());
    for payoff in base_payoffs {
        let base = solve_pde(gen, payoff, horizon, config)?;
        let tol = tol_solver(base.diagnostics.dx);
        let transformed = base.surface.map(|y| h.value(y));
        let (class, min, max) = match classify_process(gen, &transformed, &times, tol) {
            Ok(r) => (Some(r.class), r.min_discrepancy, r.max_discrepancy),
            Err(LabError::InconclusiveClassification { min, max, .. }) => (None, min, max),
            Err(e) => return Err(e),
        };
        let consistent = match (implied, class) {
            (Some(i), Some(c)) => i.admits(c),
            (Some(_), None) => false,
            (None, _) => true,
        };
        if !consistent {
            return Err(LabError::ContradictionDetected(format!(
                "h = {h} is verdicted {implied:?} but h(Y) for payoff {} classifies as {class:?} (discrepancy in [{min}, {max}])",
                payoff.phi()
            )));
        }
        entries.push(TransformEntry { payoff: payoff.phi().label(), class, min_discrepancy: min, max_discrepancy: max, consistent });
    }
    let inverse_evidence = match implied {
        Some(ProcessClass::GSubmartingale) | Some(ProcessClass::GMartingale) => None,
        _ => Some(entries.iter().any(|e| !ProcessClass::GSubmartingale.admits_opt(e.class))),
    };
    Ok(TransformReport {
        h: h.label(),
        convex,
        concave,
        implied,
        entries,
        inverse_evidence,
        direction: if implied.is_some() { "certificate" } else { "evidence" }.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(src: &str) -> GeneratorSpec {
        GeneratorSpec::parse(src, 1).unwrap()
    }

    fn classify(g: &str, phi: &str, h: &str) -> Result<ProcessReport, LabError> {
        let g = gen(g);
        let r = solve_pde(&g, &PayoffSpec::parse(phi).unwrap(), 1.0, &PdeConfig::default()).unwrap();
        let h = ScalarFunction::parse(h).unwrap();
        classify_process(&g, &r.surface.map(|y| h.value(y)), &default_times(1.0), tol_solver(r.diagnostics.dx))
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify("abs(z1)", "x", "y").unwrap().class, ProcessClass::GMartingale);
        assert_eq!(classify("abs(z1)", "x", "y*y").unwrap().class, ProcessClass::GSubmartingale);
        assert_eq!(classify("0", "x*x", "y").unwrap().class, ProcessClass::GMartingale);
        assert_eq!(classify("y", "1", "y*y").unwrap().class, ProcessClass::GSupermartingale);
    }

    #[test]
    fn transform_suites() {
        let cfg = PdeConfig::default();
        let scan = Scan::default_for(1.0, 1);
        let payoffs: Vec<_> = ["x", "x + 1", "2*x"].iter().map(|s| PayoffSpec::parse(s).unwrap()).collect();
        let r = martingale_transform_suite(&gen("abs(z1)"), &ScalarFunction::parse("y*y").unwrap(), &payoffs, 1.0, &cfg, &scan)
            .unwrap();
        assert_eq!(r.implied, Some(ProcessClass::GSubmartingale));
        assert!(r.entries.iter().all(|e| e.class == Some(ProcessClass::GSubmartingale)));
        let r = martingale_transform_suite(&gen("abs(z1)"), &ScalarFunction::identity(), &payoffs, 1.0, &cfg, &scan).unwrap();
        assert!(r.entries.iter().all(|e| e.class == Some(ProcessClass::GMartingale)));
        let one = [PayoffSpec::parse("1").unwrap()];
        let r = martingale_transform_suite(&gen("y"), &ScalarFunction::parse("y*y").unwrap(), &one, 1.0, &cfg, &scan).unwrap();
        assert_eq!(r.implied, None);
        assert_eq!(r.inverse_evidence, Some(true));
        assert_eq!(r.direction, "evidence");
    }
}
