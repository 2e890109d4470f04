//! The stretched Brownian motion built from a fixed point, its simulation,
//! and the multi-maturity Bass local volatility model.
//!
//! On an interval of length `h` with start law `μ`, terminal law `ν` and
//! fixed point `α`, the terminal map is `f(x) = Q_ν(Σ_j w_j Φ((x − α_j)/√h))`
//! and `M_s = f_s(B_s)` with `f_s = φ_{h−s} ∗ f` and `B_0 ~ α`.

mod calibrate;
mod diagnostics;
mod pchip;
mod simulate;

pub use calibrate::{
    calibrate_bass_lv, partition_refinement_demo, CalibratedBassModel, CalibrationConfig, ComponentModel,
    IntervalModel, PartitionDemoRow, SolverMethod,
};
pub use diagnostics::{martingale_diagnostics, BinGap, DiagnosticThresholds, MartingaleReport};
pub use pchip::MonotoneCubic;
pub use simulate::{simulate, PathBatch, SimulationConfig, SummaryRow, RNG_NAME};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointProblem;
use crate::gauss_kernel::{normal, GaussHermite};
use crate::measures::{AnalyticDistribution, DiscreteMeasure, StepQuantile};

/// Width of the tabulation window in standard deviations of `B_h − B_0`.
const TABLE_SPREAD: f64 = 8.0;

/// `f` and its heat smoothings `f_s` on one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapsSpec", into = "MapsSpec")]
pub struct TransportMaps {
    alpha: DiscreteMeasure,
    nu: AnalyticDistribution,
    horizon: f64,
    gh: GaussHermite,
}

#[derive(Serialize, Deserialize)]
struct MapsSpec {
    alpha: DiscreteMeasure,
    nu: AnalyticDistribution,
    horizon: f64,
    quadrature_order: usize,
}

impl TryFrom<MapsSpec> for TransportMaps {
    type Error = Error;

    fn try_from(s: MapsSpec) -> Result<Self> {
        TransportMaps::new(s.alpha, s.nu, s.horizon, s.quadrature_order)
    }
}

impl From<TransportMaps> for MapsSpec {
    fn from(m: TransportMaps) -> Self {
        MapsSpec { quadrature_order: m.gh.order(), alpha: m.alpha, nu: m.nu, horizon: m.horizon }
    }
}

impl TransportMaps {
    pub fn new(alpha: DiscreteMeasure, nu: AnalyticDistribution, horizon: f64, quadrature_order: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain(format!("interval length must be positive, got {horizon}")));
        }
        nu.validate()?;
        if !nu.is_bounded() {
            return Err(Error::assumption("terminal law must have compact support"));
        }
        Ok(Self { alpha, nu, horizon, gh: GaussHermite::new(quadrature_order)? })
    }

    pub fn alpha(&self) -> &DiscreteMeasure {
        &self.alpha
    }

    pub fn nu(&self) -> &AnalyticDistribution {
        &self.nu
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `φ_h ∗ F_α`, the law of `B_h`.
    pub fn smoothed_cdf(&self, x: f64) -> f64 {
        let sd = self.horizon.sqrt();
        self.alpha.atoms().iter().zip(self.alpha.weights()).map(|(a, w)| w * normal::cdf((x - a) / sd)).sum()
    }

    /// `f = f_h`.
    pub fn terminal(&self, x: f64) -> f64 {
        self.nu.quantile(self.smoothed_cdf(x))
    }

    /// `f_s(x)` for local time `s ∈ [0, h]`.
    pub fn at(&self, s: f64, x: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&s) {
            return Err(Error::domain(format!("time {s} outside [0, {}]", self.horizon)));
        }
        let v = self.horizon - s;
        if v == 0.0 {
            return Ok(self.terminal(x));
        }
        let y = self.gh.expect_var(v, |z| self.terminal(x + z));
        if !y.is_finite() {
            return Err(Error::numeric(format!("f_{s}({x}) is not finite")));
        }
        Ok(y)
    }

    /// Range of `B` covered by [`Self::tabulate`].
    pub fn table_range(&self) -> (f64, f64) {
        let (a, b) = self.alpha.support();
        let r = TABLE_SPREAD * self.horizon.sqrt();
        (a - r, b + r)
    }

    /// `f_s` on `nodes` equally spaced points of [`Self::table_range`].
    pub fn tabulate(&self, s: f64, nodes: usize) -> Result<MapTable> {
        if nodes < 2 {
            return Err(Error::domain("a map table needs at least two nodes"));
        }
        let (lo, hi) = self.table_range();
        let x: Vec<f64> = (0..nodes).map(|k| lo + (hi - lo) * k as f64 / (nodes - 1) as f64).collect();
        let mut y = x.par_iter().map(|&v| self.at(s, v)).collect::<Result<Vec<f64>>>()?;
        // Quadrature noise can break monotonicity by an ulp in the flat tails.
        for k in 1..y.len() {
            y[k] = y[k].max(y[k - 1]);
        }
        Ok(MapTable { time: s, spline: MonotoneCubic::new(x, y)? })
    }
}

/// Tabulated `f_s` with direct evaluation outside the table.
#[derive(Debug, Clone)]
pub struct MapTable {
    time: f64,
    spline: MonotoneCubic,
}

impl MapTable {
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn eval(&self, maps: &TransportMaps, x: f64) -> f64 {
        match self.spline.eval(x) {
            Some(v) => v,
            None => maps.at(self.time, x).unwrap_or(f64::NAN),
        }
    }
}

/// Builds the maps from a computed fixed point of `p`. The weights of `alpha`
/// must be those of `μ`, and `alpha` must be a fixed point up to shift.
pub fn build_maps(p: &FixedPointProblem, alpha: &DiscreteMeasure) -> Result<TransportMaps> {
    if alpha.weights() != p.mu().weights() {
        return Err(Error::domain("fixed point must carry the weights of μ"));
    }
    let q = StepQuantile::from_measure(alpha);
    let (lo, hi) = p.apply_g(&q)?.difference_range(&q);
    let residual = 0.5 * (hi - lo);
    let tol = (100.0 * p.config().atol).max(1e-8);
    if !(residual <= tol) {
        return Err(Error::domain(format!(
            "α is not a fixed point: shift-minimised residual {residual:e} exceeds {tol:e}"
        )));
    }
    TransportMaps::new(alpha.clone(), p.nu().clone(), p.time_scale(), p.config().kernel.quadrature_order)
}
