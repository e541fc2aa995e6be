use serde::{Deserialize, Serialize};

use super::scan::{scan_extremes, Scan, Witness};
use super::{ConvexityError, TAU_SYMBOLIC};
use crate::dsl::GeneratorSpec;
use crate::function::ScalarFunction;

/// The affine map `y -> a y + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePair {
    pub a: f64,
    pub b: f64,
}

impl AffinePair {
    pub fn new(a: f64, b: f64) -> Self {
        AffinePair { a, b }
    }

    pub fn apply(&self, y: f64) -> f64 {
        self.a * y + self.b
    }

    pub fn to_function(&self) -> ScalarFunction {
        ScalarFunction::affine(self.a, self.b)
    }

    /// `g(t, a y + b, a z) - a g(t, y, z)`.
    pub fn defect(&self, gen: &GeneratorSpec, t: f64, y: f64, z: &[f64]) -> f64 {
        let mut buf = [0.0; 8];
        let heap: Vec<f64>;
        let az: &[f64] = if z.len() <= buf.len() {
            for (s, v) in buf.iter_mut().zip(z) {
                *s = self.a * v;
            }
            &buf[..z.len()]
        } else {
            heap = z.iter().map(|v| self.a * v).collect();
            &heap
        };
        gen.eval(t, self.apply(y), az) - self.a * gen.eval(t, y, z)
    }
}

/// Membership decision with the most adverse scanned point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    pub pair: AffinePair,
    /// `max |defect|` for `Π_g^a`, `min defect` for `Π_g^v`.
    pub margin: f64,
    pub witness: Witness,
    pub tolerance: f64,
}

fn scan_defect(gen: &GeneratorSpec, pair: AffinePair, scan: &Scan) -> Result<super::scan::Extremes, ConvexityError> {
    scan.validate()?;
    if scan.dim_z != gen.dim_z() {
        return Err(ConvexityError::DimensionMismatch { expected: gen.dim_z(), got: scan.dim_z });
    }
    if !pair.a.is_finite() || !pair.b.is_finite() {
        return Err(ConvexityError::InvalidScan(format!("non-finite pair ({}, {})", pair.a, pair.b)));
    }
    let ys = scan.ys();
    let zs = scan.z_vectors();
    Ok(scan_extremes(&scan.times, &ys, &zs, |t, i, z| Some(pair.defect(gen, t, ys[i], z))).expect("nonempty scan"))
}

/// `(a, b) ∈ Π_g^a`: `g(t, a y + b, a z) = a g(t, y, z)` on the scan.
pub fn pi_a_membership(gen: &GeneratorSpec, pair: AffinePair, scan: &Scan) -> Result<Membership, ConvexityError> {
    let ext = scan_defect(gen, pair, scan)?;
    let (margin, witness) =
        if ext.max.abs() > ext.min.abs() { (ext.max.abs(), ext.max_at) } else { (ext.min.abs(), ext.min_at) };
    Ok(Membership { member: margin <= TAU_SYMBOLIC, pair, margin, witness, tolerance: TAU_SYMBOLIC })
}

/// `(a, b) ∈ Π_g^v`: `g(t, a y + b, a z) >= a g(t, y, z)` on the scan.
pub fn pi_v_membership(gen: &GeneratorSpec, pair: AffinePair, scan: &Scan) -> Result<Membership, ConvexityError> {
    let ext = scan_defect(gen, pair, scan)?;
    Ok(Membership { member: ext.min >= -TAU_SYMBOLIC, pair, margin: ext.min, witness: ext.min_at, tolerance: TAU_SYMBOLIC })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(src: &str) -> GeneratorSpec {
        GeneratorSpec::parse(src, 1).unwrap()
    }

    #[test]
    fn abs_z_affine_set() {
        let g = gen("abs(z1)");
        let scan = Scan::default_for(1.0, 1);
        assert!(pi_a_membership(&g, AffinePair::new(2.0, 3.0), &scan).unwrap().member);
        assert!(pi_a_membership(&g, AffinePair::new(1.0, 0.0), &scan).unwrap().member);
        let m = pi_a_membership(&g, AffinePair::new(-1.0, 0.0), &scan).unwrap();
        assert!(!m.member);
        assert_eq!(m.margin, 10.0);
        assert_ne!(m.witness.z[0], 0.0);
    }

    #[test]
    fn linear_y_dominance_reduces_to_intercept_sign() {
        let g = gen("y");
        let scan = Scan::default_for(1.0, 1);
        assert!(!pi_v_membership(&g, AffinePair::new(2.0, -1.0), &scan).unwrap().member);
        assert!(pi_v_membership(&g, AffinePair::new(2.0, 1.0), &scan).unwrap().member);
        assert!(!pi_a_membership(&g, AffinePair::new(2.0, 1.0), &scan).unwrap().member);
    }

    #[test]
    fn identity_pair_is_always_affine() {
        let scan = Scan::default_for(1.0, 1);
        for src in ["0", "y", "abs(z1)", "0.5*y + 2*z1", "-abs(z1) + t*y"] {
            assert!(pi_a_membership(&gen(src), AffinePair::new(1.0, 0.0), &scan).unwrap().member, "{src}");
        }
    }
}
