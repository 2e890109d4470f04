//! The semidiscrete system: for `μ = Σ w_j δ_{x_j}` the fixed point is
//! `Σ w_j δ_{y_j}` where
//!
//! ```text
//! R_i(y) = ∫ Q_ν(Σ_j w_j Φ(y_i − y_j − z)) φ(z) dz − x_i = 0.
//! ```
//!
//! The system is invariant under `y ↦ y + c`, so `J·𝟏 = 0`. Newton's method
//! fixes the gauge with the extra row `Σ w_j y_j = 0` and solves the
//! `(n+1) × n` system in the least-squares sense.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointProblem;
use crate::measures::{DiscreteMeasure, Measure, StepQuantile};

/// Newton settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    /// Target for `‖R‖_∞`.
    pub atol: f64,
    pub max_iters: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { atol: 1e-10, max_iters: 50, max_halvings: 30 }
    }
}

/// Outcome of [`SemidiscreteSystem::solve_newton`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub y: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    /// `‖R‖_∞` before each step and at the end.
    pub residual_history: Vec<f64>,
    /// Singular values of `J` at the solution, descending. The last one is
    /// the shift direction and should vanish.
    pub singular_values: Vec<f64>,
}

impl NewtonReport {
    pub fn solution(&self, weights: &[f64]) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.y.clone(), weights.to_vec())
    }
}

/// Residual and Jacobian of the fixed-point equation for a discrete `μ`.
#[derive(Debug, Clone)]
pub struct SemidiscreteSystem<'p> {
    problem: &'p FixedPointProblem,
}

impl<'p> SemidiscreteSystem<'p> {
    pub fn new(problem: &'p FixedPointProblem) -> Self {
        Self { problem }
    }

    pub fn problem(&self) -> &FixedPointProblem {
        self.problem
    }

    pub fn len(&self) -> usize {
        self.problem.mu().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn state(&self, y: &[f64]) -> StepQuantile {
        StepQuantile::from_parts(y.to_vec(), self.problem.mu().weights().to_vec())
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.len() {
            return Err(Error::domain(format!("expected {} unknowns, got {}", self.len(), y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("unknowns must be finite"));
        }
        Ok(())
    }

    /// `R_i(y) = S_y(y_i) − x_i`.
    pub fn residual(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        let q = self.state(y);
        let xs = self.problem.mu().atoms();
        let h = self.problem.time_scale().sqrt();
        self.problem.with_s_map(&q, |s| {
            y.par_iter()
                .zip(xs)
                .map(|(yi, xi)| Ok(s.eval(yi / h)? * h - xi))
                .collect::<Result<Vec<f64>>>()
        })?
    }

    /// `∂R_i/∂y_j = −w_j T(y_i, y_j)` off the diagonal and
    /// `S'(y_i) − w_i T(y_i, y_i)` on it.
    pub fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        self.check(y)?;
        let n = y.len();
        let q = self.state(y);
        let w = self.problem.mu().weights();
        let h = self.problem.time_scale().sqrt();
        let ys: Vec<f64> = y.iter().map(|v| v / h).collect();
        let rows = self.problem.with_s_map(&q, |s| {
            ys.par_iter()
                .enumerate()
                .map(|(i, yi)| {
                    let ds = s.derivative(*yi)?;
                    let mut row: Vec<f64> =
                        s.t_row(*yi, &ys).into_iter().zip(w).map(|(t, wj)| -wj * t).collect();
                    row[i] += ds;
                    Ok(row)
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })??;
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Newton's method with the gauge row `Σ w_j y_j = 0` and backtracking
    /// on `‖R‖_∞`. Starts from one fixed-point sweep of `Q_μ` if `y0` is
    /// `None`.
    pub fn solve_newton(&self, y0: Option<&[f64]>, opts: NewtonOptions) -> Result<NewtonReport> {
        let n = self.len();
        let w = DVector::from_column_slice(self.problem.mu().weights());
        let mut y = match y0 {
            Some(v) => v.to_vec(),
            None => self.problem.apply_g(&self.problem.initial_state())?.values().to_vec(),
        };
        self.check(&y)?;
        recentre(&mut y, w.as_slice());
        let mut r = self.residual(&y)?;
        let mut norm = sup(&r);
        let mut history = vec![norm];
        let mut iterations = 0;
        while norm > opts.atol {
            if iterations == opts.max_iters {
                return Err(Error::numeric(format!(
                    "Newton stalled at ‖R‖ = {norm:e} after {iterations} steps"
                )));
            }
            iterations += 1;
            let j = self.jacobian(&y)?;
            let mut a = DMatrix::zeros(n + 1, n);
            a.view_mut((0, 0), (n, n)).copy_from(&j);
            a.row_mut(n).copy_from(&w.transpose());
            let mut rhs = DVector::zeros(n + 1);
            for i in 0..n {
                rhs[i] = -r[i];
            }
            rhs[n] = -w.dot(&DVector::from_column_slice(&y));
            let svd = a.svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smin > 1e-13 * smax) {
                return Err(Error::numeric(format!("augmented Jacobian is singular (σ_min = {smin:e})")));
            }
            let step = svd
                .solve(&rhs, 1e-14 * smax)
                .map_err(|e| Error::numeric(format!("least-squares solve failed: {e}")))?;

            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
                if trial.windows(2).all(|p| p[0] <= p[1]) {
                    let rt = self.residual(&trial)?;
                    let nt = sup(&rt);
                    if nt < norm {
                        y = trial;
                        r = rt;
                        norm = nt;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                // No decrease along the Newton direction: the residual is at
                // its floor.
                log::debug!("Newton line search exhausted at ‖R‖ = {norm:e}");
                break;
            }
            history.push(norm);
        }
        if norm > opts.atol {
            return Err(Error::numeric(format!("Newton stopped at ‖R‖ = {norm:e} > {:e}", opts.atol)));
        }
        recentre(&mut y, w.as_slice());
        let singular_values = {
            let mut s: Vec<f64> = self.jacobian(&y)?.singular_values().iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            s
        };
        Ok(NewtonReport { y, iterations, residual_norm: norm, residual_history: history, singular_values })
    }

    /// Halves the unknowns using the mirror symmetry of `μ` and `ν`.
    pub fn symmetry_reduce(&self) -> Result<ReducedSystem<'_, 'p>> {
        let mu: Measure = self.problem.mu().clone().into();
        let nu: Measure = self.problem.nu().clone().into();
        let cm = mu.symmetry_center(1e-12).ok_or_else(|| Error::domain("μ is not symmetric"))?;
        let cn = nu.symmetry_center(1e-9).ok_or_else(|| Error::domain("ν is not symmetric"))?;
        if (cm - cn).abs() > 1e-9 {
            return Err(Error::domain(format!("μ and ν have different centres ({cm} vs {cn})")));
        }
        Ok(ReducedSystem { full: self })
    }
}

/// The system restricted to states `y_{n+1−i} = −y_i` (and `y = 0` for the
/// middle atom of odd `n`). The gauge `Σ w_j y_j = 0` holds automatically, so
/// `⌊n/2⌋` unknowns remain.
#[derive(Debug, Clone)]
pub struct ReducedSystem<'s, 'p> {
    full: &'s SemidiscreteSystem<'p>,
}

impl ReducedSystem<'_, '_> {
    pub fn unknowns(&self) -> usize {
        self.full.len() / 2
    }

    /// Full state from the lower-half unknowns.
    pub fn expand(&self, z: &[f64]) -> Vec<f64> {
        let n = self.full.len();
        let mut y = vec![0.0; n];
        for (i, v) in z.iter().enumerate() {
            y[i] = *v;
            y[n - 1 - i] = -v;
        }
        y
    }

    /// The first `⌊n/2⌋` equations of the full system.
    pub fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let r = self.full.residual(&self.expand(z))?;
        Ok(r[..self.unknowns()].to_vec())
    }

    /// `∂R_i/∂z_j = J_{i,j} − J_{i,n−1−j}`.
    pub fn jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.full.len();
        let k = self.unknowns();
        let j = self.full.jacobian(&self.expand(z))?;
        Ok(DMatrix::from_fn(k, k, |a, b| j[(a, b)] - j[(a, n - 1 - b)]))
    }

    /// Plain Newton with backtracking on the square reduced system; returns
    /// the expanded full state.
    pub fn solve(&self, z0: &[f64], opts: NewtonOptions) -> Result<NewtonReport> {
        let k = self.unknowns();
        if z0.len() != k {
            return Err(Error::domain(format!("expected {k} reduced unknowns")));
        }
        let mut z = z0.to_vec();
        let mut r = if k == 0 { vec![] } else { self.residual(&z)? };
        let mut norm = sup(&r);
        let mut history = vec![norm];
        let mut iterations = 0;
        while norm > opts.atol && iterations < opts.max_iters {
            iterations += 1;
            let j = self.jacobian(&z)?;
            let step = j
                .lu()
                .solve(&DVector::from_iterator(k, r.iter().map(|v| -v)))
                .ok_or_else(|| Error::numeric("reduced Jacobian is singular"))?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
                let y = self.expand(&trial);
                if y.windows(2).all(|p| p[0] <= p[1]) {
                    let rt = self.residual(&trial)?;
                    let nt = sup(&rt);
                    if nt < norm {
                        (z, r, norm) = (trial, rt, nt);
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
            history.push(norm);
        }
        if norm > opts.atol {
            return Err(Error::numeric(format!("reduced Newton stopped at ‖R‖ = {norm:e}")));
        }
        let y = self.expand(&z);
        // The mirrored equations hold by symmetry; report the full residual.
        let full = sup(&self.full.residual(&y)?);
        Ok(NewtonReport {
            y,
            iterations,
            residual_norm: full,
            residual_history: history,
            singular_values: vec![],
        })
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn recentre(y: &mut [f64], w: &[f64]) {
    let m: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
    for v in y.iter_mut() {
        *v -= m;
    }
}
