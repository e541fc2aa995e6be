//! Generator-level structure tests that predict Jensen behaviour for whole
//! classes of functions: super-homogeneity, translation invariance, the
//! self-financing and zero-interest conditions, and `y`-shift relations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convexity::{pi_a_membership, AffinePair, ConvexityError, Membership, Scan, TAU_SYMBOLIC};
use crate::dsl::GeneratorSpec;
use crate::function::node;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CharacterizationError {
    #[error(transparent)]
    Convexity(#[from] ConvexityError),
    #[error("{test}: flag route says {flag}, affine-set route says {membership} (margin {margin})")]
    InconsistentRoutes { test: String, flag: bool, membership: bool, margin: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Pointwise relation between `g(t, y + c, z)` and `g(t, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Equal,
    Ge,
    Le,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharWitness {
    pub t: f64,
    pub y: f64,
    pub z: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub test: String,
    pub verdict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation: Option<Relation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<CharWitness>,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// `{-3, -2, -1, -0.5, 0, 0.5, 1, 2, 3}` followed by 50 uniform points in `[-3, 3]`.
pub fn default_lambdas() -> Vec<f64> {
    let mut l = vec![-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0];
    l.extend((0..50).map(|i| node(-3.0, 3.0, 50, i)));
    l
}

/// Translation constants, including an irrational one.
pub const SHIFTS: [f64; 5] = [-2.0, -1.0, 1.0, 2.0, std::f64::consts::FRAC_PI_3];

fn check_dim(gen: &GeneratorSpec, scan: &Scan) -> Result<(), CharacterizationError> {
    scan.validate()?;
    if scan.dim_z != gen.dim_z() {
        return Err(ConvexityError::DimensionMismatch { expected: gen.dim_z(), got: scan.dim_z }.into());
    }
    Ok(())
}

fn scale(z: &[f64], a: f64) -> Vec<f64> {
    z.iter().map(|v| a * v).collect()
}

/// Largest `|g(t, y, z) - g(t, y_0, z)|` on the scan: a witness of `y` dependence.
fn y_dependence(gen: &GeneratorSpec, scan: &Scan) -> (f64, CharWitness) {
    let ys = scan.ys();
    let y0 = ys[ys.len() / 2];
    let mut best = (0.0, CharWitness { t: scan.times[0], y: y0, z: vec![0.0; gen.dim_z()], lambda: None, shift: None });
    for &t in &scan.times {
        for &y in &ys {
            for z in scan.z_vectors() {
                let d = (gen.eval(t, y, &z) - gen.eval(t, y0, &z)).abs();
                if d > best.0 {
                    best = (d, CharWitness { t, y, z, lambda: None, shift: None });
                }
            }
        }
    }
    best
}

/// `g(t, λ z) >= λ g(t, z)` for `y`-free generators.
pub fn super_homogeneity_test(
    gen: &GeneratorSpec,
    lambdas: &[f64],
    scan: &Scan,
) -> Result<CharacterizationReport, CharacterizationError> {
    check_dim(gen, scan)?;
    if lambdas.is_empty() {
        return Err(CharacterizationError::InvalidInput("empty lambda grid".into()));
    }
    if !gen.flags().independent_of_y {
        let (d, w) = y_dependence(gen, scan);
        return Ok(CharacterizationReport {
            test: "super_homogeneity".into(),
            verdict: false,
            relation: None,
            witness: Some(w),
            margin: -d,
            reason: Some("dependent_on_y".into()),
        });
    }
    let mut best: Option<(f64, CharWitness)> = None;
    for &t in &scan.times {
        for &lambda in lambdas {
            for z in scan.z_vectors() {
                let m = gen.eval(t, 0.0, &scale(&z, lambda)) - lambda * gen.eval(t, 0.0, &z);
                if best.as_ref().is_none_or(|(b, _)| m < *b) {
                    best = Some((m, CharWitness { t, y: 0.0, z, lambda: Some(lambda), shift: None }));
                }
            }
        }
    }
    let (margin, witness) = best.expect("nonempty scan");
    let verdict = margin >= -TAU_SYMBOLIC;
    Ok(CharacterizationReport {
        test: "super_homogeneity".into(),
        verdict,
        relation: None,
        witness: (!verdict).then_some(witness),
        margin,
        reason: None,
    })
}

/// True iff `g` is `y`-free and super-homogeneous in `z`: then every convex
/// function is g-convex.
pub fn jensen_all_convex_predictor(gen: &GeneratorSpec, scan: &Scan) -> Result<bool, CharacterizationError> {
    Ok(gen.flags().independent_of_y && super_homogeneity_test(gen, &default_lambdas(), scan)?.verdict)
}

/// Combines a flag with a family of `Π_g^a` memberships. A disagreement
/// counts only if the membership margin is beyond tolerance.
fn reconcile(
    test: &str,
    flag: bool,
    memberships: Vec<(Membership, Option<f64>)>,
) -> Result<CharacterizationReport, CharacterizationError> {
    let worst = memberships
        .iter()
        .fold(None::<&(Membership, Option<f64>)>, |acc, m| match acc {
            Some(a) if a.0.margin >= m.0.margin => Some(a),
            _ => Some(m),
        })
        .expect("at least one pair");
    let member = memberships.iter().all(|(m, _)| m.member);
    if flag != member && (flag || worst.0.margin > TAU_SYMBOLIC) {
        return Err(CharacterizationError::InconsistentRoutes {
            test: test.into(),
            flag,
            membership: member,
            margin: worst.0.margin,
        });
    }
    let witness = (!member).then(|| CharWitness {
        t: worst.0.witness.t,
        y: worst.0.witness.y,
        z: worst.0.witness.z.clone(),
        lambda: None,
        shift: worst.1,
    });
    Ok(CharacterizationReport {
        test: test.into(),
        verdict: member,
        relation: None,
        witness,
        margin: worst.0.margin,
        reason: None,
    })
}

/// `g(t, 0, 0) = 0`, equivalently the zero function is g-affine.
pub fn self_financing_test(gen: &GeneratorSpec, scan: &Scan) -> Result<CharacterizationReport, CharacterizationError> {
    check_dim(gen, scan)?;
    let m = pi_a_membership(gen, AffinePair::new(0.0, 0.0), scan)?;
    reconcile("self_financing", gen.flags().zero_at_origin, vec![(m, None)])
}

/// `g(t, y, 0) = 0` for all `y`, equivalently every constant is g-affine.
pub fn zero_interest_test(gen: &GeneratorSpec, scan: &Scan) -> Result<CharacterizationReport, CharacterizationError> {
    check_dim(gen, scan)?;
    let mut constants = vec![0.0, 1.0, -1.0];
    constants.extend(scan.ys());
    let ms = constants
        .into_iter()
        .map(|c| Ok((pi_a_membership(gen, AffinePair::new(0.0, c), scan)?, Some(c))))
        .collect::<Result<Vec<_>, ConvexityError>>()?;
    reconcile("zero_interest", gen.flags().zero_on_y_axis, ms)
}

/// `y + c` g-affine for every sampled `c`, equivalently `g` is `y`-free.
pub fn translation_invariance_test(
    gen: &GeneratorSpec,
    scan: &Scan,
) -> Result<CharacterizationReport, CharacterizationError> {
    check_dim(gen, scan)?;
    let ms = SHIFTS
        .iter()
        .map(|&c| Ok((pi_a_membership(gen, AffinePair::new(1.0, c), scan)?, Some(c))))
        .collect::<Result<Vec<_>, ConvexityError>>()?;
    reconcile("translation_invariance", gen.flags().independent_of_y, ms)
}

/// Classifies `g(t, y + c, z) - g(t, y, z)` by sign over the scan.
pub fn periodicity_test(gen: &GeneratorSpec, c: f64, scan: &Scan) -> Result<CharacterizationReport, CharacterizationError> {
    check_dim(gen, scan)?;
    if c == 0.0 || !c.is_finite() {
        return Err(CharacterizationError::InvalidInput(format!("shift c = {c} must be nonzero")));
    }
    let (mut min, mut max) = ((f64::INFINITY, None), (f64::NEG_INFINITY, None));
    for &t in &scan.times {
        for y in scan.ys() {
            for z in scan.z_vectors() {
                let d = gen.eval(t, y + c, &z) - gen.eval(t, y, &z);
                if d < min.0 {
                    min = (d, Some(CharWitness { t, y, z: z.clone(), lambda: None, shift: Some(c) }));
                }
                if d > max.0 {
                    max = (d, Some(CharWitness { t, y, z, lambda: None, shift: Some(c) }));
                }
            }
        }
    }
    let tau = TAU_SYMBOLIC;
    let (relation, margin, witness) = if min.0 >= -tau && max.0 <= tau {
        (Relation::Equal, if max.0.abs() > min.0.abs() { max.0 } else { min.0 }, None)
    } else if min.0 >= -tau {
        (Relation::Ge, min.0, None)
    } else if max.0 <= tau {
        (Relation::Le, max.0, None)
    } else {
        (Relation::None, min.0, min.1)
    };
    Ok(CharacterizationReport {
        test: "periodicity".into(),
        verdict: relation != Relation::None,
        relation: Some(relation),
        witness,
        margin,
        reason: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(src: &str) -> GeneratorSpec {
        GeneratorSpec::parse(src, 1).unwrap()
    }

    fn scan() -> Scan {
        Scan::default_for(1.0, 1)
    }

    #[test]
    fn lambda_grid() {
        let l = default_lambdas();
        assert_eq!(l.len(), 59);
        assert_eq!(l[9], -3.0);
        assert_eq!(l[58], 3.0);
    }

    #[test]
    fn super_homogeneity_examples() {
        assert!(super_homogeneity_test(&gen("abs(z1)"), &default_lambdas(), &scan()).unwrap().verdict);
        let r = super_homogeneity_test(&gen("-abs(z1)"), &default_lambdas(), &scan()).unwrap();
        assert!(!r.verdict);
        let w = r.witness.unwrap();
        assert!(w.lambda.unwrap() < 0.0);
        assert!(r.margin < -TAU_SYMBOLIC);
        let r = super_homogeneity_test(&gen("2*z1"), &default_lambdas(), &scan()).unwrap();
        assert!(r.verdict);
        assert_eq!(r.margin, 0.0);
        let r = super_homogeneity_test(&gen("y"), &default_lambdas(), &scan()).unwrap();
        assert_eq!(r.reason.as_deref(), Some("dependent_on_y"));
        assert!(r.witness.is_some());
    }

    #[test]
    fn predictor() {
        for (src, want) in [("abs(z1)", true), ("2*z1", true), ("y", false), ("-abs(z1)", false)] {
            assert_eq!(jensen_all_convex_predictor(&gen(src), &scan()).unwrap(), want, "{src}");
        }
    }

    #[test]
    fn financing_conditions() {
        let g = gen("abs(z1)");
        assert!(self_financing_test(&g, &scan()).unwrap().verdict);
        assert!(zero_interest_test(&g, &scan()).unwrap().verdict);
        let g = gen("y");
        assert!(self_financing_test(&g, &scan()).unwrap().verdict);
        let r = zero_interest_test(&g, &scan()).unwrap();
        assert!(!r.verdict);
        assert!(r.witness.unwrap().shift.is_some());
        let g = gen("1");
        assert!(!self_financing_test(&g, &scan()).unwrap().verdict);
        assert!(!zero_interest_test(&g, &scan()).unwrap().verdict);
    }

    #[test]
    fn translation_invariance() {
        assert!(translation_invariance_test(&gen("abs(z1)"), &scan()).unwrap().verdict);
        assert!(translation_invariance_test(&gen("t*z1"), &scan()).unwrap().verdict);
        let r = translation_invariance_test(&gen("y"), &scan()).unwrap();
        assert!(!r.verdict);
        assert!((r.margin - 2.0).abs() < 1e-12);
    }

    #[test]
    fn periodicity() {
        let r = periodicity_test(&gen("abs(z1)"), 1.0, &scan()).unwrap();
        assert_eq!(r.relation, Some(Relation::Equal));
        let r = periodicity_test(&gen("y"), 1.0, &scan()).unwrap();
        assert_eq!(r.relation, Some(Relation::Ge));
        assert!((r.margin - 1.0).abs() < 1e-12);
        let r = periodicity_test(&gen("-y"), 1.0, &scan()).unwrap();
        assert_eq!(r.relation, Some(Relation::Le));
        let r = periodicity_test(&gen("y*z1 / 10"), 1.0, &scan()).unwrap();
        assert_eq!(r.relation, Some(Relation::None));
        assert!(periodicity_test(&gen("y"), 0.0, &scan()).is_err());
    }
}
