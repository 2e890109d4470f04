//! Per-iteration records of a fixed-point run.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based count of operator applications.
    pub iteration: usize,
    /// `‖𝒢Q − Q‖_∞`.
    pub residual: f64,
    /// `min_c ‖𝒢Q − Q − c‖_∞`.
    pub shifted_residual: f64,
    /// The minimising `c`; the drift removed by recentring.
    pub shift: f64,
    /// Ratio of this shift-minimised residual to the previous one.
    pub rate: Option<f64>,
    /// Shift-minimised distance from this iterate to the last one.
    pub distance_to_final: f64,
    /// Recentred iterate after this step.
    pub iterate: Vec<f64>,
    /// Wall time of the step. Not serialized, so exports stay reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Cell weights shared by every iterate.
    pub weights: Vec<f64>,
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights, records: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_residual(&self) -> f64 {
        self.last().map_or(f64::NAN, |r| r.shifted_residual)
    }

    pub fn total_time(&self) -> Duration {
        self.records.iter().map(|r| r.elapsed).sum()
    }

    pub(crate) fn push(&mut self, mut rec: IterationRecord) {
        rec.rate = self.records.last().map(|p| rec.shifted_residual / p.shifted_residual);
        self.records.push(rec);
    }

    /// Fills `distance_to_final` once the run has ended.
    pub(crate) fn finish(&mut self) {
        let Some(last) = self.records.last().map(|r| r.iterate.clone()) else { return };
        for r in &mut self.records {
            let (lo, hi) = r
                .iterate
                .iter()
                .zip(&last)
                .map(|(a, b)| a - b)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
            r.distance_to_final = 0.5 * (hi - lo);
        }
    }

    /// Rates of the last `k` steps that have one.
    pub fn tail_rates(&self, k: usize) -> Vec<f64> {
        let rates: Vec<f64> = self.records.iter().filter_map(|r| r.rate).collect();
        rates[rates.len().saturating_sub(k)..].to_vec()
    }

    /// Geometric mean of the last `k` per-step rates.
    pub fn observed_rate(&self, k: usize) -> Option<f64> {
        let tail = self.tail_rates(k);
        if tail.is_empty() || tail.iter().any(|r| !(*r > 0.0)) {
            return None;
        }
        Some((tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp())
    }

    /// Least-squares slope of `ln(shifted residual)` against the iteration
    /// index over the last `k` records, returned as a per-step factor.
    pub fn fitted_rate(&self, k: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self.records[self.records.len().saturating_sub(k)..]
            .iter()
            .filter(|r| r.shifted_residual > 0.0)
            .map(|r| (r.iteration as f64, r.shifted_residual.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some((sxy / sxx).exp())
    }

    /// Columns `iteration,residual,shifted_residual,rate,shift,distance_to_final`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iteration", "residual", "shifted_residual", "rate", "shift", "distance_to_final"])?;
        for r in &self.records {
            wr.write_record([
                r.iteration.to_string(),
                format!("{:?}", r.residual),
                format!("{:?}", r.shifted_residual),
                r.rate.map(|q| format!("{q:?}")).unwrap_or_default(),
                format!("{:?}", r.shift),
                format!("{:?}", r.distance_to_final),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
