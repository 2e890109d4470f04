//! Quantile functions represented as nondecreasing step functions on (0, 1).
//!
//! These are the states on which the fixed-point operator acts. Unlike
//! [`DiscreteMeasure`], values may tie: a constant quantile function is a
//! legitimate state.

use serde::{Deserialize, Serialize};

use super::DiscreteMeasure;
use crate::error::{Error, Result};

/// `Q(u) = values[j]` for `u ∈ [p_j, p_{j+1})`, where `p_j` are the partial
/// sums of `weights`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepQuantile {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl StepQuantile {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::domain("step quantile needs matching non-empty values/weights"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("quantile values must be finite"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("quantile values must be nondecreasing"));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::domain("cell weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("cell weights sum to {total}, not 1")));
        }
        Ok(Self { values, weights })
    }

    /// Builds a state without re-validating; callers guarantee the invariants.
    pub(crate) fn from_parts(values: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), weights.len());
        Self { values, weights }
    }

    /// Equal cells `1/m`.
    pub fn equal_cells(values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        Self::new(values, vec![1.0 / m.max(1) as f64; m])
    }

    pub fn constant(c: f64, weights: Vec<f64>) -> Self {
        Self { values: vec![c; weights.len()], weights }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cell boundaries `0 = p_0 < … < p_n = 1`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        p.push(0.0);
        for w in &self.weights {
            acc += w;
            p.push(acc);
        }
        *p.last_mut().unwrap() = 1.0;
        p
    }

    pub fn eval(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (v, w) in self.values.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return *v;
            }
        }
        *self.values.last().unwrap()
    }

    /// `∫_0^1 Q(u) du`.
    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + c).collect(), weights: self.weights.clone() }
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), weights: self.weights.clone() }
    }

    /// Range of `self − other` over (0, 1), computed on the common refinement
    /// of both partitions: returns `(inf, sup)`.
    pub fn difference_range(&self, other: &StepQuantile) -> (f64, f64) {
        let (pa, pb) = (self.boundaries(), other.boundaries());
        let (mut i, mut j) = (0usize, 0usize);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        // Walk both partitions; every overlap cell of positive length counts.
        while i < self.len() && j < other.len() {
            let right = pa[i + 1].min(pb[j + 1]);
            let left = pa[i].max(pb[j]);
            if right - left > 1e-15 {
                let d = self.values[i] - other.values[j];
                lo = lo.min(d);
                hi = hi.max(d);
            }
            if pa[i + 1] <= pb[j + 1] {
                i += 1;
            } else {
                j += 1;
            }
        }
        (lo, hi)
    }

    /// `‖self − other‖_∞`.
    pub fn sup_distance(&self, other: &StepQuantile) -> f64 {
        let (lo, hi) = self.difference_range(other);
        lo.abs().max(hi.abs())
    }

    /// Law of `Q(U)`.
    pub fn to_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(self.values.clone(), self.weights.clone())
            .expect("step quantile cells always form a probability measure")
    }

    /// The quantile function of `m`.
    pub fn from_measure(m: &DiscreteMeasure) -> Self {
        Self { values: m.atoms().to_vec(), weights: m.weights().to_vec() }
    }

    /// Pulls the state back onto another partition: `Q(u)` sampled at the
    /// midpoint of each target cell.
    pub fn resample(&self, weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let values = weights
            .iter()
            .map(|w| {
                let mid = acc + 0.5 * w;
                acc += w;
                self.eval(mid)
            })
            .collect();
        Self { values, weights: weights.to_vec() }
    }
}

/// How a [`QuantileGrid`] is read between its nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Step,
    Linear,
}

/// A quantile function sampled at midpoint nodes `u_k = (k − ½)/m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileGrid {
    values: Vec<f64>,
    pub interpolation: Interpolation,
}

impl QuantileGrid {
    pub fn new(values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        StepQuantile::equal_cells(values.clone())?;
        Ok(Self { values, interpolation })
    }

    /// Samples `q` at the midpoint nodes.
    pub fn sample(m: usize, q: impl Fn(f64) -> f64, interpolation: Interpolation) -> Result<Self> {
        let values = (1..=m).map(|k| q((k as f64 - 0.5) / m as f64)).collect();
        Self::new(values, interpolation)
    }

    pub fn nodes(&self) -> Vec<f64> {
        let m = self.values.len() as f64;
        (1..=self.values.len()).map(|k| (k as f64 - 0.5) / m).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, u: f64) -> f64 {
        let m = self.values.len();
        match self.interpolation {
            Interpolation::Step => {
                let k = ((u * m as f64).floor() as usize).min(m - 1);
                self.values[k]
            }
            Interpolation::Linear => {
                let s = u * m as f64 - 0.5;
                if s <= 0.0 {
                    return self.values[0];
                }
                let k = s.floor() as usize;
                if k + 1 >= m {
                    return self.values[m - 1];
                }
                let t = s - k as f64;
                (1.0 - t) * self.values[k] + t * self.values[k + 1]
            }
        }
    }

    /// The equal-cell step state; the form the operators act on.
    pub fn to_step(&self) -> StepQuantile {
        let m = self.values.len();
        StepQuantile::from_parts(self.values.clone(), vec![1.0 / m as f64; m])
    }
}
