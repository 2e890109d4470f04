//! Empirical checks of a simulated batch: martingale gaps and marginal fit.

use serde::{Deserialize, Serialize};

use super::PathBatch;
use crate::error::{Error, Result};
use crate::measures::{ks_distance, Measure};

const BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticThresholds {
    /// KS threshold is `ks_factor / √N`.
    pub ks_factor: f64,
    /// Allowed decile gap in standard errors.
    pub max_gap_se: f64,
}

impl Default for DiagnosticThresholds {
    fn default() -> Self {
        Self { ks_factor: 1.95, max_gap_se: 4.0 }
    }
}

/// `E[M_T − M_t | M_t in decile]` for one time and one decile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGap {
    pub time: f64,
    pub bin: usize,
    pub count: usize,
    pub mean_t: f64,
    pub mean_terminal: f64,
    pub gap: f64,
    pub stderr: f64,
}

impl BinGap {
    /// `|gap| / stderr`, zero when both vanish.
    pub fn ratio(&self) -> f64 {
        if self.stderr > 0.0 {
            self.gap.abs() / self.stderr
        } else if self.gap.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub paths: usize,
    /// `mean(M_T) − mean(M_{t_0})`.
    pub drift: f64,
    pub drift_stderr: f64,
    pub bins: Vec<BinGap>,
    pub max_gap_ratio: f64,
    /// `(time, KS distance)` for every supplied marginal on the grid.
    pub ks: Vec<(f64, f64)>,
    pub ks_threshold: f64,
    pub thresholds: DiagnosticThresholds,
}

impl MartingaleReport {
    pub fn ks_ok(&self) -> bool {
        self.ks.iter().all(|(_, d)| *d <= self.ks_threshold)
    }

    pub fn martingale_ok(&self) -> bool {
        self.max_gap_ratio <= self.thresholds.max_gap_se
            && self.drift.abs() <= self.thresholds.max_gap_se * self.drift_stderr.max(1e-15)
    }

    pub fn passed(&self) -> bool {
        self.ks_ok() && self.martingale_ok()
    }
}

/// Decile martingale gaps of every grid time against the last, the overall
/// drift, and KS distances to `marginals` at their maturities.
pub fn martingale_diagnostics(
    batch: &PathBatch,
    marginals: &[(f64, Measure)],
    thresholds: DiagnosticThresholds,
) -> Result<MartingaleReport> {
    let g = batch.times.len();
    if g == 0 || batch.paths < 2 * BINS {
        return Err(Error::domain("diagnostics need a grid and at least 20 paths"));
    }
    let n = batch.paths;
    let last = batch.column(g - 1);
    let first = batch.column(0);
    let diffs: Vec<f64> = last.iter().zip(&first).map(|(a, b)| a - b).collect();
    let (drift, sd) = mean_sd(&diffs);

    let mut bins = Vec::new();
    for k in 0..g - 1 {
        let col = batch.column(k);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        for bin in 0..BINS {
            let idx = &order[bin * n / BINS..(bin + 1) * n / BINS];
            let d: Vec<f64> = idx.iter().map(|&p| last[p] - col[p]).collect();
            let (gap, s) = mean_sd(&d);
            let mean_t = idx.iter().map(|&p| col[p]).sum::<f64>() / idx.len() as f64;
            bins.push(BinGap {
                time: batch.times[k],
                bin,
                count: idx.len(),
                mean_t,
                mean_terminal: mean_t + gap,
                gap,
                stderr: s / (idx.len() as f64).sqrt(),
            });
        }
    }
    let max_gap_ratio = bins.iter().map(BinGap::ratio).fold(0.0, f64::max);

    let mut ks = Vec::new();
    for (t, m) in marginals {
        if let Some(k) = batch.time_index(*t) {
            ks.push((*t, ks_distance(&batch.column(k), m)));
        }
    }
    Ok(MartingaleReport {
        paths: n,
        drift,
        drift_stderr: sd / (n as f64).sqrt(),
        bins,
        max_gap_ratio,
        ks,
        ks_threshold: thresholds.ks_factor / (n as f64).sqrt(),
        thresholds,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bass_model::{calibrate_bass_lv, simulate, CalibrationConfig, SimulationConfig};
    use crate::measures::{AnalyticDistribution, DiscreteMeasure};

    fn batch(n: usize, seed: u64) -> (PathBatch, Vec<(f64, Measure)>) {
        let marg: Vec<(f64, Measure)> = vec![
            (0.0, DiscreteMeasure::dirac(0.0).into()),
            (1.0, AnalyticDistribution::uniform(-1.0, 1.0).unwrap().into()),
        ];
        let m = calibrate_bass_lv(&marg, &CalibrationConfig::default()).unwrap();
        let cfg = SimulationConfig { paths: n, times: vec![0.3, 0.6], seed, ..Default::default() };
        (simulate(&m, &cfg).unwrap(), marg)
    }

    #[test]
    fn bass_case_passes() {
        let (b, marg) = batch(20_000, 11);
        let r = martingale_diagnostics(&b, &marg, DiagnosticThresholds::default()).unwrap();
        assert_eq!(r.bins.len(), 30);
        assert!(r.passed(), "{:?} {}", r.ks, r.max_gap_ratio);
    }

    #[test]
    fn corrupted_map_is_flagged() {
        let (mut b, marg) = batch(20_000, 11);
        // Replace the terminal column by a non-monotone transform of itself.
        let g = b.times.len();
        for p in 0..b.paths {
            let v = &mut b.values[p * g + g - 1];
            *v = (3.0 * *v).sin();
        }
        let r = martingale_diagnostics(&b, &marg, DiagnosticThresholds::default()).unwrap();
        assert!(!r.ks_ok());
        assert!(!r.passed());
    }
}
