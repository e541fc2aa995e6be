use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::SolveError;
use crate::function::node;

/// Width, in standard deviations of the elapsed diffusion, of the boundary
/// layer treated as untrusted: `sqrt(2 ln 1e4)`, where a Gaussian tail falls
/// below 1e-4.
pub const TRUST_SIGMAS: f64 = 4.291_932_052_578_31;

/// Uniform partition of `[x_min, x_max]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl SpaceGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, SolveError> {
        if n < 3 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(SolveError::InvalidInput(format!("space grid [{x_min}, {x_max}] with {n} nodes")));
        }
        Ok(SpaceGrid { x_min, x_max, n })
    }

    /// Symmetric box `x0 ± (6 sqrt(T) + mu_hat T)`: Gaussian tails plus maximal
    /// drift transport.
    pub fn for_problem(x0: f64, horizon: f64, mu_hat: f64, n: usize) -> Result<Self, SolveError> {
        let half = 6.0 * horizon.sqrt() + mu_hat * horizon;
        let half = if half > 0.0 { half } else { 1.0 };
        Self::new(x0 - half, x0 + half, n)
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / ((self.n - 1) as f64)
    }

    pub fn x(&self, j: usize) -> f64 {
        node(self.x_min, self.x_max, self.n, j)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Nodes at distance at least `reach` from both edges.
    pub fn interior_range(&self, reach: f64) -> Range<usize> {
        let dx = self.step();
        let k = (reach / dx - 1e-9).ceil().max(0.0) as usize;
        if 2 * k >= self.n {
            0..0
        } else {
            k..self.n - k
        }
    }

    /// Linear interpolation of `row` (on this grid) at `x`.
    pub fn interpolate(&self, row: &[f64], x: f64) -> Result<f64, SolveError> {
        let tol = 1e-9 * self.step();
        if x < self.x_min - tol || x > self.x_max + tol {
            return Err(SolveError::InterpolationOutOfRange(format!(
                "x={x} outside [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let s = ((x - self.x_min) / self.step()).max(0.0);
        let i = (s.floor() as usize).min(self.n - 2);
        let w = s - i as f64;
        Ok(if w == 0.0 { row[i] } else { row[i] + w * (row[i + 1] - row[i]) })
    }

    /// Resamples `row` from `self` onto `target`.
    pub fn resample(&self, row: &[f64], target: &SpaceGrid) -> Result<Vec<f64>, SolveError> {
        if target == self {
            return Ok(row.to_vec());
        }
        (0..target.n).map(|j| self.interpolate(row, target.x(j))).collect()
    }
}

/// Uniform partition of `[t_start, t_end]` into `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            self.t_start + self.dt() * k as f64
        }
    }
}

/// Boundary-layer width after `elapsed` time units of diffusion plus drift
/// transport at speed `drift`.
pub fn boundary_reach(elapsed: f64, drift: f64) -> f64 {
    let e = elapsed.max(0.0);
    TRUST_SIGMAS * e.sqrt() + drift * e
}

/// One time row on a grid, usable as terminal data for a further solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub grid: SpaceGrid,
    pub values: Vec<f64>,
    /// Time since the data was free of boundary error.
    pub elapsed: f64,
    /// Largest transport speed seen since then.
    pub drift: f64,
}

impl Slice {
    /// Exact data: no boundary layer yet.
    pub fn exact(grid: SpaceGrid, f: impl Fn(f64) -> f64) -> Self {
        Slice { grid, values: grid.points().into_iter().map(f).collect(), elapsed: 0.0, drift: 0.0 }
    }

    pub fn reach(&self) -> f64 {
        boundary_reach(self.elapsed, self.drift)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Slice {
        Slice { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }
}

/// Values `u(t_k, x_j)` on a time-space grid, with the bookkeeping needed to
/// tell how far boundary errors may have travelled inward.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub times: Vec<f64>,
    pub grid: SpaceGrid,
    /// `values[k][j] = u(times[k], x_j)`.
    pub values: Vec<Vec<f64>>,
    /// Per row: time since the data was free of boundary error.
    pub elapsed: Vec<f64>,
    pub drift: f64,
}

impl Surface {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    fn bracket(&self, t: f64) -> Result<(usize, f64), SolveError> {
        let first = self.times[0];
        let last = *self.times.last().expect("nonempty surface");
        let tol = 1e-12 * (1.0 + last.abs());
        if t < first - tol || t > last + tol {
            return Err(SolveError::InterpolationOutOfRange(format!("t={t} outside [{first}, {last}]")));
        }
        let k = match self.times.iter().position(|&s| s >= t - tol) {
            Some(0) | None => return Ok((0, 0.0)),
            Some(k) => k,
        };
        if (self.times[k] - t).abs() <= tol {
            return Ok((k, 0.0));
        }
        let w = (t - self.times[k - 1]) / (self.times[k] - self.times[k - 1]);
        Ok((k - 1, w))
    }

    /// Row at time `t`, linear in time between stored rows.
    pub fn row_at(&self, t: f64) -> Result<Vec<f64>, SolveError> {
        let (k, w) = self.bracket(t)?;
        if w == 0.0 {
            return Ok(self.values[k].clone());
        }
        Ok(self.values[k].iter().zip(&self.values[k + 1]).map(|(a, b)| a + w * (b - a)).collect())
    }

    /// Distance from each edge within which row `k` is not trusted.
    pub fn reach(&self, k: usize) -> f64 {
        boundary_reach(self.elapsed[k], self.drift)
    }

    pub fn reach_at(&self, t: f64) -> Result<f64, SolveError> {
        let (k, w) = self.bracket(t)?;
        Ok(if w == 0.0 { self.reach(k) } else { self.reach(k).max(self.reach(k + 1)) })
    }

    pub fn slice_at(&self, t: f64) -> Result<Slice, SolveError> {
        let (k, w) = self.bracket(t)?;
        let elapsed = if w == 0.0 { self.elapsed[k] } else { self.elapsed[k].max(self.elapsed[k + 1]) };
        Ok(Slice { grid: self.grid, values: self.row_at(t)?, elapsed, drift: self.drift })
    }

    /// Value at `(t, x)`, failing with `DomainTooSmall` inside the boundary layer.
    pub fn trusted_value_at(&self, t: f64, x: f64) -> Result<f64, SolveError> {
        if !self.is_trusted(t, x)? {
            return Err(SolveError::DomainTooSmall { t, x });
        }
        self.value_at(t, x)
    }

    pub fn value_at(&self, t: f64, x: f64) -> Result<f64, SolveError> {
        let row = self.row_at(t)?;
        self.grid.interpolate(&row, x)
    }

    /// Whether `(t, x)` lies outside the boundary layer at time `t`.
    pub fn is_trusted(&self, t: f64, x: f64) -> Result<bool, SolveError> {
        let r = self.reach_at(t)?;
        let tol = 1e-9 * self.grid.step();
        Ok(x - self.grid.x_min >= r - tol && self.grid.x_max - x >= r - tol)
    }

    pub fn trusted_range(&self, k: usize) -> Range<usize> {
        self.grid.interior_range(self.reach(k))
    }

    /// Pointwise image `f(u)`; the boundary layer is unchanged.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Surface {
        Surface {
            times: self.times.clone(),
            grid: self.grid,
            values: self.values.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect(),
            elapsed: self.elapsed.clone(),
            drift: self.drift,
        }
    }

    /// Central differences in `x` (one-sided at the edges).
    pub fn x_derivative(&self) -> Vec<Vec<f64>> {
        let dx = self.grid.step();
        let n = self.grid.n;
        self.values
            .iter()
            .map(|row| {
                (0..n)
                    .map(|j| match j {
                        0 => (row[1] - row[0]) / dx,
                        j if j == n - 1 => (row[n - 1] - row[n - 2]) / dx,
                        j => (row[j + 1] - row[j - 1]) / (2.0 * dx),
                    })
                    .collect()
            })
            .collect()
    }

    /// CSV dump with header `t,x,u,z`, time-major, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let z = self.x_derivative();
        writeln!(out, "t,x,u,z")?;
        for (k, row) in self.values.iter().enumerate() {
            for (j, u) in row.iter().enumerate() {
                writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", self.times[k], self.grid.x(j), u, z[k][j])?;
            }
        }
        Ok(())
    }
}
