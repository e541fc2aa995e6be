use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ConvexityError;
use crate::function::node;

/// Tensor grid of `(t, y, z)` sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan {
    pub times: Vec<f64>,
    pub y_min: f64,
    pub y_max: f64,
    pub y_points: usize,
    pub z_min: f64,
    pub z_max: f64,
    /// Points per `z` coordinate.
    pub z_points: usize,
    pub dim_z: usize,
}

impl Scan {
    /// `t ∈ {0, T/2, T}`, `y ∈ [-5, 5]` (201 points), each `z_k ∈ [-5, 5]` (51 points).
    pub fn default_for(horizon: f64, dim_z: usize) -> Self {
        Scan {
            times: vec![0.0, horizon / 2.0, horizon],
            y_min: -5.0,
            y_max: 5.0,
            y_points: 201,
            z_min: -5.0,
            z_max: 5.0,
            z_points: 51,
            dim_z,
        }
    }

    pub fn with_y(mut self, y_min: f64, y_max: f64, y_points: usize) -> Self {
        self.y_min = y_min;
        self.y_max = y_max;
        self.y_points = y_points;
        self
    }

    pub fn with_z(mut self, z_min: f64, z_max: f64, z_points: usize) -> Self {
        self.z_min = z_min;
        self.z_max = z_max;
        self.z_points = z_points;
        self
    }

    pub fn validate(&self) -> Result<(), ConvexityError> {
        let bad = |m: &str| Err(ConvexityError::InvalidScan(m.to_string()));
        if self.times.is_empty() || self.times.iter().any(|t| !t.is_finite()) {
            return bad("need at least one finite time");
        }
        if self.y_points == 0 || self.z_points == 0 || self.dim_z == 0 {
            return bad("empty y or z axis");
        }
        if !(self.y_max >= self.y_min) || !(self.z_max >= self.z_min) {
            return bad("axis bounds out of order");
        }
        if (self.y_points > 1 && self.y_max == self.y_min) || (self.z_points > 1 && self.z_max == self.z_min) {
            return bad("degenerate axis with several points");
        }
        Ok(())
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.y_points).map(|i| node(self.y_min, self.y_max, self.y_points, i)).collect()
    }

    pub fn y_step(&self) -> f64 {
        if self.y_points > 1 {
            (self.y_max - self.y_min) / (self.y_points - 1) as f64
        } else {
            0.0
        }
    }

    pub fn z_axis(&self) -> Vec<f64> {
        (0..self.z_points).map(|i| node(self.z_min, self.z_max, self.z_points, i)).collect()
    }

    /// All `z` vectors in lexicographic order.
    pub fn z_vectors(&self) -> Vec<Vec<f64>> {
        let axis = self.z_axis();
        let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(self.dim_z)];
        for _ in 0..self.dim_z {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// A sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub y: f64,
    pub z: Vec<f64>,
}

/// Smallest and largest value of a scanned quantity and where they occur.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Extremes {
    pub min: f64,
    pub min_at: Witness,
    pub max: f64,
    pub max_at: Witness,
    pub count: usize,
}

impl Extremes {
    fn single(v: f64, at: Witness) -> Self {
        Extremes { min: v, min_at: at.clone(), max: v, max_at: at, count: 1 }
    }

    /// Strict comparisons: on ties the earlier (lexicographically smaller) point wins.
    fn absorb(&mut self, other: Extremes) {
        if other.min < self.min || (self.min.is_nan() && !other.min.is_nan()) {
            self.min = other.min;
            self.min_at = other.min_at;
        }
        if other.max > self.max || (self.max.is_nan() && !other.max.is_nan()) {
            self.max = other.max;
            self.max_at = other.max_at;
        }
        self.count += other.count;
    }

    /// Pointwise extremes of two quantities merged into one record.
    pub fn merge(a: Option<Extremes>, b: Option<Extremes>) -> Option<Extremes> {
        match (a, b) {
            (Some(mut a), Some(b)) => {
                a.absorb(b);
                Some(a)
            }
            (a, None) => a,
            (None, b) => b,
        }
    }
}

/// Scans `f(t, y_index, z)` over `times × ys × z_vectors` in parallel and
/// reduces in lexicographic order. `None` values are skipped.
pub(crate) fn scan_extremes<F>(times: &[f64], ys: &[f64], zs: &[Vec<f64>], f: F) -> Option<Extremes>
where
    F: Fn(f64, usize, &[f64]) -> Option<f64> + Sync,
{
    let cells: Vec<(f64, usize)> = times.iter().flat_map(|&t| (0..ys.len()).map(move |i| (t, i))).collect();
    let partials: Vec<Option<Extremes>> = cells
        .par_iter()
        .map(|&(t, i)| {
            let mut acc: Option<Extremes> = None;
            for z in zs {
                if let Some(v) = f(t, i, z) {
                    let e = Extremes::single(v, Witness { t, y: ys[i], z: z.clone() });
                    acc = Extremes::merge(acc, Some(e));
                }
            }
            acc
        })
        .collect();
    partials.into_iter().fold(None, Extremes::merge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scan_shape() {
        let s = Scan::default_for(1.0, 1);
        assert_eq!(s.times, vec![0.0, 0.5, 1.0]);
        let ys = s.ys();
        assert_eq!(ys.len(), 201);
        assert_eq!(ys[100], 0.0);
        assert_eq!(ys[120], 1.0);
        assert_eq!(s.z_vectors().len(), 51);
        assert_eq!(s.z_axis()[25], 0.0);
    }

    #[test]
    fn z_vectors_are_lexicographic() {
        let s = Scan::default_for(1.0, 2).with_z(-1.0, 1.0, 3);
        let v = s.z_vectors();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], vec![-1.0, -1.0]);
        assert_eq!(v[1], vec![-1.0, 0.0]);
        assert_eq!(v[8], vec![1.0, 1.0]);
    }

    #[test]
    fn ties_keep_first_point() {
        let times = [0.0, 1.0];
        let ys = [-1.0, 0.0, 1.0];
        let zs = vec![vec![0.0], vec![1.0]];
        let e = scan_extremes(&times, &ys, &zs, |_, _, _| Some(3.0)).unwrap();
        assert_eq!(e.min_at, Witness { t: 0.0, y: -1.0, z: vec![0.0] });
        assert_eq!(e.max_at, e.min_at);
        assert_eq!(e.count, 12);
        let e = scan_extremes(&times, &ys, &zs, |t, i, z| Some(-(ys[i] * ys[i]) + t + z[0])).unwrap();
        assert_eq!(e.min, -1.0);
        assert_eq!(e.min_at, Witness { t: 0.0, y: -1.0, z: vec![0.0] });
        assert_eq!(e.max, 2.0);
    }

    #[test]
    fn validation() {
        assert!(Scan::default_for(1.0, 1).validate().is_ok());
        let mut s = Scan::default_for(1.0, 1);
        s.times.clear();
        assert!(s.validate().is_err());
        assert!(Scan::default_for(1.0, 1).with_y(1.0, 1.0, 5).validate().is_err());
    }
}
