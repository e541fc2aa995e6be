use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PayoffSpec, SolveError};
use crate::dsl::GeneratorSpec;

/// Paths per reduction block; fixed so sums do not depend on thread count.
const BLOCK: usize = 1024;
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub paths: usize,
    pub steps: usize,
    pub basis_degree: usize,
    pub seed: u64,
    pub picard_iters: usize,
    pub ridge: f64,
    pub bootstrap: usize,
    pub x0: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 20_000,
            steps: 200,
            basis_degree: 4,
            seed: 42,
            picard_iters: 5,
            ridge: 1e-10,
            bootstrap: 200,
            x0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McDiagnostics {
    pub paths: usize,
    pub steps: usize,
    pub dt: f64,
    pub basis_degree: usize,
    pub picard_iters: usize,
    pub max_condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub y0: f64,
    pub stderr: f64,
    pub z0: f64,
    pub diagnostics: McDiagnostics,
}

/// Deterministic blocked sum of `f(p)` over `0..n`.
fn blocked_sum<const K: usize>(n: usize, f: impl Fn(usize) -> [f64; K] + Sync) -> [f64; K] {
    let partials: Vec<[f64; K]> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = [0.0; K];
            for p in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let v = f(p);
                for k in 0..K {
                    acc[k] += v[k];
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; K];
    for part in partials {
        for k in 0..K {
            total[k] += part[k];
        }
    }
    total
}

/// Least-squares projection onto monomials of a standardized state.
struct Regression {
    degree: usize,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Regression {
    fn new(xi: &[f64], degree: usize, ridge: f64, step: usize) -> Result<(Self, f64), SolveError> {
        let m = degree + 1;
        let n = xi.len();
        // Moments E[xi^k] for k = 0..2*degree fill the Hankel normal matrix.
        let moments: Vec<f64> = {
            let parts: Vec<Vec<f64>> = (0..n.div_ceil(BLOCK))
                .into_par_iter()
                .map(|b| {
                    let mut acc = vec![0.0; 2 * m - 1];
                    for &x in &xi[b * BLOCK..((b + 1) * BLOCK).min(n)] {
                        let mut p = 1.0;
                        for a in acc.iter_mut() {
                            *a += p;
                            p *= x;
                        }
                    }
                    acc
                })
                .collect();
            let mut total = vec![0.0; 2 * m - 1];
            for part in parts {
                for (t, v) in total.iter_mut().zip(part) {
                    *t += v;
                }
            }
            total.into_iter().map(|v| v / n as f64).collect()
        };
        let a = DMatrix::from_fn(m, m, |i, j| moments[i + j] + if i == j { ridge } else { 0.0 });
        let eig = SymmetricEigen::new(a.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(SolveError::RegressionSingular { step, condition });
        }
        let chol = a.cholesky().ok_or(SolveError::RegressionSingular { step, condition })?;
        Ok((Regression { degree, chol }, condition))
    }

    /// Fitted values of the regression of `target` on the basis.
    fn fit(&self, xi: &[f64], target: &[f64]) -> Vec<f64> {
        let m = self.degree + 1;
        let n = xi.len();
        let parts: Vec<Vec<f64>> = (0..n.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut acc = vec![0.0; m];
                for p in b * BLOCK..((b + 1) * BLOCK).min(n) {
                    let mut q = target[p];
                    for a in acc.iter_mut() {
                        *a += q;
                        q *= xi[p];
                    }
                }
                acc
            })
            .collect();
        let mut rhs = DVector::zeros(m);
        for part in parts {
            for (k, v) in part.into_iter().enumerate() {
                rhs[k] += v;
            }
        }
        rhs /= n as f64;
        let coef = self.chol.solve(&rhs);
        xi.par_iter()
            .map(|&x| {
                let mut acc = 0.0;
                for k in (0..m).rev() {
                    acc = acc * x + coef[k];
                }
                acc
            })
            .collect()
    }
}

fn picard(gen: &GeneratorSpec, t: f64, e: f64, z: f64, dt: f64, iters: usize) -> f64 {
    let mut y = e;
    for _ in 0..iters {
        y = e + gen.eval1(t, y, z) * dt;
    }
    y
}

/// Backward regression Monte Carlo for `Y_0` with terminal value `phi(x0 + W_T)`.
pub fn solve_mc(
    gen: &GeneratorSpec,
    payoff: &PayoffSpec,
    horizon: f64,
    config: &McConfig,
) -> Result<McResult, SolveError> {
    if gen.dim_z() != 1 {
        return Err(SolveError::UnsupportedDimension(gen.dim_z()));
    }
    if config.paths < 1000 || config.steps < 10 || config.basis_degree < 2 {
        return Err(SolveError::InvalidInput(format!(
            "need paths >= 1000, steps >= 10, basis_degree >= 2; got {}, {}, {}",
            config.paths, config.steps, config.basis_degree
        )));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(SolveError::InvalidInput(format!("horizon {horizon} must be positive")));
    }
    let (np, ns) = (config.paths, config.steps);
    let dt = horizon / ns as f64;
    if gen.mu_hat() * dt >= 1.0 {
        return Err(SolveError::PicardDivergence(gen.mu_hat() * dt));
    }
    let sqrt_dt = dt.sqrt();

    // Path p owns stream p of the seeded generator; increments are drawn in step order.
    let increments: Vec<f64> = (0..np)
        .into_par_iter()
        .flat_map_iter(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(p as u64);
            (0..ns).map(move |_| sqrt_dt * rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>()
        })
        .collect();
    let dw = |p: usize, i: usize| increments[p * ns + i];

    let mut w: Vec<f64> = (0..np).map(|p| (0..ns).map(|i| dw(p, i)).sum()).collect();
    let mut y: Vec<f64> = w.par_iter().map(|&x| payoff.value(config.x0 + x)).collect();
    let terminal = y.clone();
    let mut driver_sum = vec![0.0; np];
    let mut max_condition: f64 = 1.0;

    for i in (1..ns).rev() {
        let t = dt * i as f64;
        for (p, wp) in w.iter_mut().enumerate() {
            *wp -= dw(p, i);
        }
        let scale = 1.0 / t.sqrt();
        let xi: Vec<f64> = w.iter().map(|&x| x * scale).collect();
        let (reg, cond) = Regression::new(&xi, config.basis_degree, config.ridge, i)?;
        max_condition = max_condition.max(cond);
        let e = reg.fit(&xi, &y);
        let resid: Vec<f64> = (0..np).map(|p| (y[p] - e[p]) * dw(p, i)).collect();
        let z: Vec<f64> = reg.fit(&xi, &resid).into_iter().map(|v| v / dt).collect();
        y = (0..np)
            .into_par_iter()
            .map(|p| picard(gen, t, e[p], z[p], dt, config.picard_iters))
            .collect();
        for p in 0..np {
            driver_sum[p] += gen.eval1(t, y[p], z[p]) * dt;
        }
    }

    let [sum_y, sum_dw] = blocked_sum(np, |p| [y[p], y[p] * dw(p, 0)]);
    let e0 = sum_y / np as f64;
    let [mean_dw] = blocked_sum(np, |p| [dw(p, 0)]);
    let z0 = (sum_dw - e0 * mean_dw) / np as f64 / dt;
    let y0 = picard(gen, 0.0, e0, z0, dt, config.picard_iters);
    let g0 = gen.eval1(0.0, y0, z0) * dt;

    // Bootstrap over paths of the telescoped pathwise estimate phi + sum g dt.
    let pathwise: Vec<f64> = (0..np).map(|p| terminal[p] + driver_sum[p] + g0).collect();
    let stderr = bootstrap_stderr(&pathwise, config.bootstrap, config.seed);

    Ok(McResult {
        y0,
        stderr,
        z0,
        diagnostics: McDiagnostics {
            paths: np,
            steps: ns,
            dt,
            basis_degree: config.basis_degree,
            picard_iters: config.picard_iters,
            max_condition,
        },
    })
}

fn bootstrap_stderr(sample: &[f64], resamples: usize, seed: u64) -> f64 {
    if resamples < 2 {
        return 0.0;
    }
    let n = sample.len();
    let means: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            rng.set_stream(b as u64);
            (0..n).map(|_| sample[rng.random_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / resamples as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(gen: &str, phi: &str) -> McResult {
        let g = GeneratorSpec::parse(gen, 1).unwrap();
        let p = PayoffSpec::parse(phi).unwrap();
        solve_mc(&g, &p, 1.0, &McConfig::default()).unwrap()
    }

    #[test]
    fn classical_second_moment() {
        let r = run("0", "x*x");
        assert!((r.y0 - 1.0).abs() <= 3.0 * r.stderr, "{r:?}");
        assert!(r.stderr > 0.0);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = run("abs(z1)", "x");
        let b = run("abs(z1)", "x");
        assert_eq!(a, b);
        assert!((a.y0 - 1.0).abs() <= 3.0 * a.stderr + 1e-2, "{a:?}");
    }

    #[test]
    fn preconditions() {
        let g = GeneratorSpec::parse("0", 1).unwrap();
        let p = PayoffSpec::parse("x").unwrap();
        let cfg = McConfig { paths: 10, ..McConfig::default() };
        assert!(matches!(solve_mc(&g, &p, 1.0, &cfg), Err(SolveError::InvalidInput(_))));
        let g = GeneratorSpec::parse("30*y", 1).unwrap();
        let cfg = McConfig { steps: 20, ..McConfig::default() };
        assert!(matches!(solve_mc(&g, &p, 1.0, &cfg), Err(SolveError::PicardDivergence(_))));
    }
}
