//! Per-interval calibration of the Bass local volatility model.

use serde::{Deserialize, Serialize};

use super::{build_maps, simulate, SimulationConfig, TransportMaps};
use crate::error::{Error, Result};
use crate::fixedpoint::{FixedPointProblem, IterationTrace, SolverConfig};
use crate::measures::{
    convex_order_leq, irreducible_components, ks_distance, quantize, AnalyticDistribution, Component,
    DiscreteMeasure, Measure,
};
use crate::semidiscrete::{NewtonOptions, NewtonReport, SemidiscreteSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub solver: SolverConfig,
    pub method: SolverMethod,
    pub newton: NewtonOptions,
    /// Atoms used when the start marginal of an interval is a closed-form law.
    pub atoms: usize,
    /// Calibrate each irreducible component separately instead of refusing
    /// reducible pairs.
    pub split_components: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            method: SolverMethod::FixedPoint,
            newton: NewtonOptions::default(),
            atoms: 50,
            split_components: false,
        }
    }
}

/// One irreducible block of an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentModel {
    pub lo: f64,
    pub hi: f64,
    /// Mass of the start marginal carried by this block.
    pub mass: f64,
    /// Start law of the block, renormalised; atom `j` is `f_0(α_j)`.
    pub mu: DiscreteMeasure,
    pub maps: TransportMaps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<IterationTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalModel {
    pub start: f64,
    pub end: f64,
    /// The discrete start law actually used.
    pub mu: DiscreteMeasure,
    /// Blocks in increasing order of location.
    pub components: Vec<ComponentModel>,
}

impl IntervalModel {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    /// Block index and within-block rank for a rank `u` of the start law.
    pub fn locate(&self, u: f64) -> (usize, f64) {
        let mut acc = 0.0;
        let last = self.components.len() - 1;
        for (c, comp) in self.components.iter().enumerate() {
            if u < acc + comp.mass || c == last {
                return (c, ((u - acc) / comp.mass).clamp(0.0, 1.0));
            }
            acc += comp.mass;
        }
        unreachable!()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedBassModel {
    pub maturities: Vec<f64>,
    pub marginals: Vec<Measure>,
    pub intervals: Vec<IntervalModel>,
}

impl CalibratedBassModel {
    pub fn first_maturity(&self) -> f64 {
        self.maturities[0]
    }

    pub fn last_maturity(&self) -> f64 {
        *self.maturities.last().unwrap()
    }

    /// Interval containing `t`, with left-closed intervals except the last.
    pub fn interval_at(&self, t: f64) -> Option<usize> {
        if !(t >= self.first_maturity() && t <= self.last_maturity()) {
            return None;
        }
        Some(self.intervals.iter().position(|iv| t < iv.end).unwrap_or(self.intervals.len() - 1))
    }
}

/// Calibrates one fixed point per interval `[T_i, T_{i+1}]` with variance
/// `T_{i+1} − T_i`. Start laws given in closed form are quantized; every
/// terminal law must be a closed-form law with a density.
pub fn calibrate_bass_lv(marginals: &[(f64, Measure)], config: &CalibrationConfig) -> Result<CalibratedBassModel> {
    if marginals.len() < 2 {
        return Err(Error::domain("need at least two maturities"));
    }
    for w in marginals.windows(2) {
        if !(w[0].0 < w[1].0) || !w[1].0.is_finite() || !w[0].0.is_finite() {
            return Err(Error::domain("maturities must be finite and strictly increasing"));
        }
    }
    for (_, m) in marginals {
        m.validate()?;
    }
    let mut intervals = Vec::with_capacity(marginals.len() - 1);
    for w in marginals.windows(2) {
        let ((t0, m0), (t1, m1)) = (&w[0], &w[1]);
        if m0 == m1 {
            return Err(Error::assumption(format!(
                "marginals at T = {t0} and T = {t1} coincide, so the pair is not irreducible"
            )));
        }
        let nu = m1.as_analytic().ok_or_else(|| {
            Error::domain(format!("marginal at T = {t1} must be a closed-form law with a density"))
        })?;
        let mu = match m0 {
            Measure::Discrete(d) => d.clone(),
            Measure::Analytic(_) => quantize(m0, config.atoms)?,
        };
        let mu_m: Measure = mu.clone().into();
        if !convex_order_leq(&mu_m, m1, config.solver.order_tol) {
            return Err(Error::assumption(format!(
                "marginals at T = {t0} and T = {t1} are not in convex order"
            )));
        }
        let comps = irreducible_components(&mu_m, m1, config.solver.irreducibility_tol)?;
        let single = comps.len() == 1 && comps[0].mu_mass >= 1.0 - 1e-9;
        log::info!("interval [{t0}, {t1}]: {} irreducible component(s)", comps.len());
        let components = if single {
            let (lo, hi) = nu.support();
            vec![solve_block(mu.clone(), nu.clone(), t1 - t0, lo, hi, 1.0, config)?]
        } else if config.split_components {
            split(&mu, nu, &comps, t1 - t0, config)?
        } else {
            return Err(Error::assumption(format!(
                "pair at T = {t0} → {t1} is not irreducible ({} components: {}); enable component splitting",
                comps.len(),
                describe(&comps)
            )));
        };
        intervals.push(IntervalModel { start: *t0, end: *t1, mu, components });
    }
    Ok(CalibratedBassModel {
        maturities: marginals.iter().map(|m| m.0).collect(),
        marginals: marginals.iter().map(|m| m.1.clone()).collect(),
        intervals,
    })
}

fn describe(comps: &[Component]) -> String {
    comps.iter().map(|c| format!("({:.6}, {:.6})", c.lo, c.hi)).collect::<Vec<_>>().join(", ")
}

fn split(
    mu: &DiscreteMeasure,
    nu: &AnalyticDistribution,
    comps: &[Component],
    h: f64,
    config: &CalibrationConfig,
) -> Result<Vec<ComponentModel>> {
    let mut out = Vec::new();
    let mut covered = 0.0;
    for c in comps.iter().filter(|c| c.mu_mass > 0.0) {
        let (atoms, weights): (Vec<f64>, Vec<f64>) = mu
            .atoms()
            .iter()
            .zip(mu.weights())
            .filter(|(x, _)| c.contains(**x))
            .map(|(x, w)| (*x, *w))
            .unzip();
        let mass: f64 = weights.iter().sum();
        let sub = DiscreteMeasure::new(atoms, weights.iter().map(|w| w / mass).collect())?;
        let nu_c = nu.restrict(c.lo, c.hi)?;
        out.push(solve_block(sub, nu_c, h, c.lo, c.hi, mass, config)?);
        covered += mass;
    }
    if (covered - 1.0).abs() > 1e-9 {
        return Err(Error::assumption(format!(
            "start law puts mass {:e} where the potentials touch",
            1.0 - covered
        )));
    }
    Ok(out)
}

fn solve_block(
    mu: DiscreteMeasure,
    nu: AnalyticDistribution,
    h: f64,
    lo: f64,
    hi: f64,
    mass: f64,
    config: &CalibrationConfig,
) -> Result<ComponentModel> {
    let p = FixedPointProblem::new(mu.clone(), nu, h, config.solver)?;
    let (alpha, trace, newton) = match config.method {
        SolverMethod::FixedPoint => {
            let (q, trace) = p.iterate(&p.initial_state())?;
            (DiscreteMeasure::new(q.values().to_vec(), q.weights().to_vec())?, Some(trace), None)
        }
        SolverMethod::Newton => {
            let rep = SemidiscreteSystem::new(&p).solve_newton(None, config.newton)?;
            (rep.solution(p.mu().weights())?, None, Some(rep))
        }
    };
    let maps = build_maps(&p, &alpha)?;
    Ok(ComponentModel { lo, hi, mass, mu, maps, trace, newton })
}

/// One row of [`partition_refinement_demo`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionDemoRow {
    pub pieces: usize,
    pub time: f64,
    pub ks: f64,
}

/// Calibrates the curve `μ_t = Unif[−√(t+ε), √(t+ε)]` on uniform partitions
/// of `[0, 1]` into each of `pieces` intervals, simulates, and reports the
/// KS distance to `μ_t` at every maturity of the partition.
pub fn partition_refinement_demo(
    pieces: &[usize],
    eps: f64,
    paths: usize,
    seed: u64,
    config: &CalibrationConfig,
) -> Result<Vec<PartitionDemoRow>> {
    if !(eps > 0.0) {
        return Err(Error::domain("ε must be positive"));
    }
    let mut rows = Vec::new();
    for &n in pieces {
        if n == 0 {
            return Err(Error::domain("partition needs at least one piece"));
        }
        let marginals: Vec<(f64, Measure)> = (0..=n)
            .map(|k| {
                let t = k as f64 / n as f64;
                let r = (t + eps).sqrt();
                Ok((t, AnalyticDistribution::uniform(-r, r)?.into()))
            })
            .collect::<Result<_>>()?;
        let model = calibrate_bass_lv(&marginals, config)?;
        let batch = simulate(
            &model,
            &SimulationConfig { paths, times: model.maturities.clone(), seed, ..Default::default() },
        )?;
        for (k, (t, m)) in marginals.iter().enumerate().skip(1) {
            rows.push(PartitionDemoRow { pieces: n, time: *t, ks: ks_distance(&batch.column(k), m) });
        }
    }
    Ok(rows)
}
