//! The operator `𝒢Q = S_Q^{-1} ∘ Q_μ` (and its CDF form `𝒜`), the iteration
//! driver, the Fréchet derivative density and contraction bounds.
//!
//! A problem with time scale `t` is solved on marginals pushed forward by
//! `x ↦ x/√t`, where both convolutions have unit variance; states are scaled
//! back on the way out. Public states are always in the original units.

mod trace;

pub use trace::{IterationRecord, IterationTrace};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss_kernel::{GaussHermite, KernelConfig, SMap};
use crate::measures::{
    convex_order_leq, irreducible_components, quantize, AnalyticDistribution, DiscreteMeasure,
    Measure, StepQuantile,
};

/// Tolerances and switches of the fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub kernel: KernelConfig,
    /// Stop once the shift-minimised residual is at most this.
    pub atol: f64,
    pub max_iters: usize,
    /// Slack allowed in the convex-order check.
    pub order_tol: f64,
    /// Potential gap below which two potentials count as touching.
    pub irreducibility_tol: f64,
    /// Iterate even if the pair splits into several components.
    pub allow_reducible: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            atol: 1e-10,
            max_iters: 10_000,
            order_tol: 1e-9,
            irreducibility_tol: 1e-10,
            allow_reducible: false,
        }
    }
}

/// `(μ, ν, t)` with `μ` finitely supported and `ν` a bounded closed-form law.
#[derive(Debug, Clone)]
pub struct FixedPointProblem {
    mu: DiscreteMeasure,
    nu: AnalyticDistribution,
    t: f64,
    scale: f64,
    nu_unit: AnalyticDistribution,
    gh: GaussHermite,
    config: SolverConfig,
    irreducible: bool,
}

impl FixedPointProblem {
    /// Checks compact support and a density floor for `ν`, `supp μ` inside
    /// the open hull of `supp ν`, and convex order.
    pub fn new(mu: DiscreteMeasure, nu: AnalyticDistribution, t: f64, config: SolverConfig) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("time scale must be positive, got {t}")));
        }
        nu.validate()?;
        if !nu.is_bounded() {
            return Err(Error::assumption("ν must have compact support"));
        }
        if !(nu.density_floor(4096) > 0.0) {
            return Err(Error::assumption("ν density is not bounded away from zero on its hull"));
        }
        let (lo, hi) = nu.support();
        let (a, b) = mu.support();
        if !(a > lo && b < hi) {
            return Err(Error::assumption(format!(
                "supp μ = [{a}, {b}] is not inside the open hull ({lo}, {hi}) of supp ν"
            )));
        }
        let (m, n): (Measure, Measure) = (mu.clone().into(), nu.clone().into());
        if !convex_order_leq(&m, &n, config.order_tol) {
            return Err(Error::assumption("μ is not dominated by ν in convex order"));
        }
        let comps = irreducible_components(&m, &n, config.irreducibility_tol)?;
        let irreducible = comps.len() == 1 && comps[0].mu_mass >= 1.0 - 1e-9;
        let gh = GaussHermite::new(config.kernel.quadrature_order)?;
        let scale = t.sqrt();
        let nu_unit = nu.affine(1.0 / scale, 0.0);
        Ok(Self { mu, nu, t, scale, nu_unit, gh, config, irreducible })
    }

    /// Quantizes `μ` to `n` atoms first if it is not already discrete.
    pub fn from_measures(mu: &Measure, n: usize, nu: AnalyticDistribution, t: f64, config: SolverConfig) -> Result<Self> {
        let mu = match mu {
            Measure::Discrete(d) => d.clone(),
            Measure::Analytic(_) => quantize(mu, n)?,
        };
        Self::new(mu, nu, t, config)
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &AnalyticDistribution {
        &self.nu
    }

    pub fn time_scale(&self) -> f64 {
        self.t
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut SolverConfig {
        &mut self.config
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    /// `Q_μ`, the default initial state.
    pub fn initial_state(&self) -> StepQuantile {
        StepQuantile::from_measure(&self.mu)
    }

    /// Runs `f` against the unit-scale map `S_Q`.
    pub fn with_s_map<R>(&self, q: &StepQuantile, f: impl FnOnce(&SMap<'_>) -> R) -> Result<R> {
        let ys: Vec<f64> = q.values().iter().map(|v| v / self.scale).collect();
        let s = SMap::new(&ys, q.weights(), &self.nu_unit, &self.gh, 1.0, self.config.kernel)?;
        Ok(f(&s))
    }

    /// `S_Q(x)` in original units.
    pub fn s_map_eval(&self, q: &StepQuantile, x: f64) -> Result<f64> {
        self.with_s_map(q, |s| s.eval(x / self.scale).map(|v| v * self.scale))?
    }

    /// `𝒢Q` on μ's partition.
    pub fn apply_g(&self, q: &StepQuantile) -> Result<StepQuantile> {
        self.apply_g_hinted(q, None)
    }

    /// `𝒢Q`, warm-starting each inversion at `hint[i]` when given.
    pub fn apply_g_hinted(&self, q: &StepQuantile, hint: Option<&[f64]>) -> Result<StepQuantile> {
        let h = self.scale;
        let xs = self.mu.atoms();
        let out = self.with_s_map(q, |s| {
            xs.par_iter()
                .enumerate()
                .map(|(i, x)| {
                    s.invert(x / h, hint.map(|v| v[i] / h)).map(|y| y * h).map_err(|e| match e {
                        Error::Range { .. } => Error::assumption(format!(
                            "μ atom {x} is outside the range of S_Q (support of μ must lie inside the hull of ν)"
                        )),
                        e => e,
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })??;
        let mut out = out;
        // Inversion error can leave adjacent outputs a few ulps out of order.
        for k in 1..out.len() {
            if out[k] < out[k - 1] {
                out[k] = out[k - 1];
            }
        }
        Ok(StepQuantile::from_parts(out, self.mu.weights().to_vec()))
    }

    /// `(𝒜F)(x) = F_μ(S_Q(x))` where `Q` is the quantile function of `F`.
    pub fn apply_a(&self, q: &StepQuantile, x: f64) -> Result<f64> {
        Ok(self.mu.cdf(self.s_map_eval(q, x)?))
    }

    /// Bounds `[x₋, x₊]` on the support of `𝒢Q` for every state with
    /// `‖Q‖_∞ ≤ r`. Comparing `Q` with the constants `±r` gives
    /// `−r + h⁻¹(x_1) ≤ 𝒢Q ≤ r + h⁻¹(x_n)` where `h = S_0`.
    pub fn output_range_bound(&self, r: f64) -> Result<(f64, f64)> {
        let zero = StepQuantile::constant(0.0, vec![1.0]);
        let (a, b) = self.mu.support();
        let h = self.scale;
        let (lo, hi) = self.with_s_map(&zero, |s| -> Result<(f64, f64)> {
            Ok((s.invert(a / h, None)? * h, s.invert(b / h, None)? * h))
        })??;
        Ok((lo - r, hi + r))
    }

    /// Runs the iteration from `q0` with the configured tolerances.
    pub fn iterate(&self, q0: &StepQuantile) -> Result<(StepQuantile, IterationTrace)> {
        self.iterate_with(q0, self.config.atol, self.config.max_iters)
    }

    /// Applies `𝒢` until the shift-minimised residual is at most `atol`.
    /// Every iterate is recentred to zero mean.
    pub fn iterate_with(&self, q0: &StepQuantile, atol: f64, max_iters: usize) -> Result<(StepQuantile, IterationTrace)> {
        if !self.irreducible {
            if self.config.allow_reducible {
                log::warn!("pair (μ, ν) is not irreducible; iterating anyway");
            } else {
                return Err(Error::domain(
                    "pair (μ, ν) is not irreducible; split it into components or allow reducible pairs",
                ));
            }
        }
        let mut q = q0.shifted(-q0.mean());
        let mut trace = IterationTrace::new(self.mu.weights().to_vec());
        for k in 1..=max_iters {
            let start = Instant::now();
            let hint = (q.len() == self.mu.len()).then(|| q.values().to_vec());
            let next = self.apply_g_hinted(&q, hint.as_deref())?;
            let (lo, hi) = next.difference_range(&q);
            let residual = lo.abs().max(hi.abs());
            let shifted_residual = 0.5 * (hi - lo);
            let drift = next.mean();
            q = next.shifted(-drift);
            trace.push(IterationRecord {
                iteration: k,
                residual,
                shifted_residual,
                shift: 0.5 * (hi + lo),
                rate: None,
                distance_to_final: 0.0,
                iterate: q.values().to_vec(),
                elapsed: start.elapsed(),
            });
            log::debug!("iteration {k}: shifted residual {shifted_residual:e}");
            if shifted_residual <= atol {
                trace.finish();
                return Ok((q, trace));
            }
        }
        trace.finish();
        Err(Error::NonConvergence {
            iterations: max_iters,
            residual: trace.final_residual(),
            trace: Box::new(trace),
        })
    }

    /// `D[i][j] = T_Q(𝒢_i Q, Q_j) / S_Q'(𝒢_i Q)`, rows on μ's partition and
    /// columns on the partition of `q`.
    pub fn derivative_density(&self, q: &StepQuantile) -> Result<DerivativeDensity> {
        let g = self.apply_g(q)?;
        let h = self.scale;
        let ys: Vec<f64> = q.values().iter().map(|v| v / h).collect();
        let matrix = self.with_s_map(q, |s| {
            g.values()
                .par_iter()
                .map(|yi| {
                    let x = yi / h;
                    let ds = s.derivative(x)?;
                    Ok(s.t_row(x, &ys).into_iter().map(|t| t / ds).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })??;
        let (epsilon, delta) = matrix
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        Ok(DerivativeDensity {
            matrix,
            row_weights: self.mu.weights().to_vec(),
            col_weights: q.weights().to_vec(),
            epsilon,
            delta,
        })
    }
}

/// Kernel of the Fréchet derivative of `𝒢` at a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeDensity {
    pub matrix: Vec<Vec<f64>>,
    pub row_weights: Vec<f64>,
    pub col_weights: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
}

impl DerivativeDensity {
    /// `Σ_j w_j D[i][j]` for every row; each is 1 in exact arithmetic.
    pub fn row_integrals(&self) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(&self.col_weights).map(|(d, w)| d * w).sum())
            .collect()
    }

    /// The derivative applied to a direction given cell by cell.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(&self.col_weights).zip(f).map(|((d, w), f)| d * w * f).sum())
            .collect()
    }

    pub fn contraction_bound(&self) -> Result<f64> {
        contraction_bound(self.epsilon, self.delta)
    }

    /// `1 − ε·min_j w_j`, the per-step factor available for finitely
    /// supported `μ`.
    pub fn discrete_rate_bound(&self) -> Result<f64> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Ellipticity(self.epsilon));
        }
        let wmin = self.col_weights.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(1.0 - self.epsilon * wmin)
    }
}

/// `q = (ε + δ)/(2ε + δ)`.
pub fn contraction_bound(epsilon: f64, delta: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Ellipticity(epsilon));
    }
    Ok((epsilon + delta) / (2.0 * epsilon + delta))
}

/// Lebesgue measure of the convex hull of a state's values.
pub fn hull_measure(q: &StepQuantile) -> f64 {
    q.values().last().unwrap() - q.values()[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_kernel::normal;

    fn two_point(a: f64, b: f64) -> FixedPointProblem {
        let mu = DiscreteMeasure::uniform(vec![-b, b]).unwrap();
        let nu = AnalyticDistribution::uniform(-a, a).unwrap();
        FixedPointProblem::new(mu, nu, 1.0, SolverConfig::default()).unwrap()
    }

    #[test]
    fn constants_are_fixed_in_the_bass_case() {
        let p = FixedPointProblem::new(
            DiscreteMeasure::dirac(0.0),
            AnalyticDistribution::uniform(-1.0, 1.0).unwrap(),
            1.0,
            SolverConfig::default(),
        )
        .unwrap();
        for c in [-0.7, 0.0, 2.0] {
            let out = p.apply_g(&StepQuantile::constant(c, vec![1.0])).unwrap();
            assert!((out.values()[0] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_closed_form() {
        let p = two_point(1.0, 0.25);
        let exact = normal::quantile(0.75) / 2f64.sqrt();
        let q0 = StepQuantile::new(vec![0.0, 0.1], vec![0.5, 0.5]).unwrap();
        let (q, trace) = p.iterate(&q0).unwrap();
        assert!((q.values()[1] - exact).abs() < 1e-9, "{:?}", q.values());
        assert!((q.values()[0] + exact).abs() < 1e-9);
        assert!(trace.final_residual() <= 1e-10);
        let bound = p.derivative_density(&q).unwrap().contraction_bound().unwrap();
        assert!(trace.observed_rate(3).unwrap() <= bound + 0.02);
    }

    #[test]
    fn starting_at_the_fixed_point_stops_after_one_check() {
        let p = two_point(1.0, 0.25);
        let exact = normal::quantile(0.75) / 2f64.sqrt();
        let q0 = StepQuantile::new(vec![-exact, exact], vec![0.5, 0.5]).unwrap();
        let (_, trace) = p.iterate(&q0).unwrap();
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn derivative_density_rows_and_uniform_shape() {
        let p = two_point(1.0, 0.25);
        let q = StepQuantile::new(vec![-0.3, 0.2], vec![0.5, 0.5]).unwrap();
        let d = p.derivative_density(&q).unwrap();
        for r in d.row_integrals() {
            assert!((r - 1.0).abs() < 1e-12);
        }
        // Uniform target: rows are normalised φ_2(y_i' − y_j).
        let g = p.apply_g(&q).unwrap();
        for (i, yi) in g.values().iter().enumerate() {
            let k: Vec<f64> = q.values().iter().map(|y| normal::pdf((yi - y) / 2f64.sqrt())).collect();
            let z: f64 = k.iter().map(|v| 0.5 * v).sum();
            for (m, kj) in d.matrix[i].iter().zip(&k) {
                assert!((m - kj / z).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bound_algebra() {
        assert!((contraction_bound(1.0, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(contraction_bound(1.0, 1e12).unwrap() > 1.0 - 1e-11);
        assert!(matches!(contraction_bound(0.0, 1.0), Err(Error::Ellipticity(_))));
    }

    #[test]
    fn reducible_pair_is_refused() {
        let nu = AnalyticDistribution::uniform(0.0, 1.0).unwrap();
        let mu = quantize(&nu.clone().into(), 2).unwrap();
        let p = FixedPointProblem::new(mu, nu, 1.0, SolverConfig::default()).unwrap();
        assert!(!p.is_irreducible());
        assert!(matches!(p.iterate(&p.initial_state()), Err(Error::Domain(_))));
    }

    #[test]
    fn assumption_checks() {
        let nu = AnalyticDistribution::uniform(-1.0, 1.0).unwrap();
        let outside = DiscreteMeasure::uniform(vec![-1.0, 1.0]).unwrap();
        assert!(matches!(
            FixedPointProblem::new(outside, nu.clone(), 1.0, SolverConfig::default()),
            Err(Error::Assumption(_))
        ));
        let wide = DiscreteMeasure::uniform(vec![-0.95, 0.95]).unwrap();
        assert!(matches!(
            FixedPointProblem::new(wide, nu, 1.0, SolverConfig::default()),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn time_scaled_operator_matches_direct_variance() {
        let mu = DiscreteMeasure::new(vec![-0.3, 0.0, 0.3], vec![0.3, 0.4, 0.3]).unwrap();
        let nu = AnalyticDistribution::trunc_normal(0.0, 0.8, -1.5, 1.5).unwrap();
        let t = 0.3;
        let p = FixedPointProblem::new(mu.clone(), nu.clone(), t, SolverConfig::default()).unwrap();
        let q = StepQuantile::new(vec![-0.5, 0.0, 0.6], vec![0.2, 0.5, 0.3]).unwrap();
        let scaled = p.apply_g(&q).unwrap();
        let gh = GaussHermite::new(64).unwrap();
        let s = SMap::new(q.values(), q.weights(), &nu, &gh, t, KernelConfig::default()).unwrap();
        for (x, y) in mu.atoms().iter().zip(scaled.values()) {
            assert!((s.invert(*x, None).unwrap() - y).abs() < 1e-10);
        }
    }

    #[test]
    fn cdf_form_agrees_with_quantile_form() {
        let p = two_point(1.0, 0.25);
        let q = StepQuantile::new(vec![-0.3, 0.2], vec![0.5, 0.5]).unwrap();
        let g = p.apply_g(&q).unwrap();
        // 𝒜F jumps to 1/2 exactly at the first output atom.
        assert!(p.apply_a(&q, g.values()[0] - 1e-9).unwrap() < 0.5);
        assert!((p.apply_a(&q, g.values()[0] + 1e-9).unwrap() - 0.5).abs() < 1e-15);
    }
}
