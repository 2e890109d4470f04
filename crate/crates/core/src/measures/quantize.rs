//! Quantization of a law by the conditional means of its quantile cells.
//!
//! Cell means use the integrated quantile `∫_0^u Q = u·Q(u) − E(Q(u) − X)^+`,
//! which is exact for every supported family. The result is dominated by
//! its input in convex order.

use super::{DiscreteMeasure, Measure};
use crate::error::{Error, Result};

/// `n` equal cells: atoms `n·∫_{(i−1)/n}^{i/n} Q`, weights `1/n`.
pub fn quantize(dist: &Measure, n: usize) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::domain("quantize needs n ≥ 1"));
    }
    quantize_on(dist, &vec![1.0 / n as f64; n])
}

/// Quantization on cells of the given widths (summing to 1).
pub fn quantize_on(dist: &Measure, weights: &[f64]) -> Result<DiscreteMeasure> {
    if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::domain("quantization cells must have positive widths"));
    }
    let mean = dist.mean();
    if !mean.is_finite() {
        return Err(Error::domain("quantize needs a finite first moment"));
    }
    let mut atoms = Vec::with_capacity(weights.len());
    let (mut u, mut prev) = (0.0, 0.0);
    for (k, w) in weights.iter().enumerate() {
        u += w;
        let iq = if k + 1 == weights.len() { mean } else { dist.integrated_quantile(u) };
        let x = (iq - prev) / w;
        if !x.is_finite() {
            return Err(Error::domain("quantile is not integrable on a cell"));
        }
        atoms.push(x);
        prev = iq;
    }
    // Round-off can leave adjacent means a few ulps out of order.
    for k in 1..atoms.len() {
        if atoms[k] < atoms[k - 1] {
            atoms[k] = atoms[k - 1];
        }
    }
    DiscreteMeasure::new(atoms, weights.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_kernel::GaussLegendre;
    use crate::measures::{convex_order_leq, AnalyticDistribution};

    fn oracle_cell_means(d: &AnalyticDistribution, n: usize) -> Vec<f64> {
        let gl = GaussLegendre::new(16).unwrap();
        (0..n)
            .map(|i| {
                let (a, b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
                n as f64 * gl.integrate_composite(a, b, 64, |u| d.quantile(u))
            })
            .collect()
    }

    #[test]
    fn uniform_cells() {
        let u: Measure = AnalyticDistribution::uniform(0.0, 1.0).unwrap().into();
        for n in [1usize, 3, 10] {
            let q = quantize(&u, n).unwrap();
            for (i, x) in q.atoms().iter().enumerate() {
                assert!((x - (2 * i + 1) as f64 / (2 * n) as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_cell_is_mean() {
        let d: Measure = AnalyticDistribution::logistic(0.3, 0.7).unwrap().into();
        let q = quantize(&d, 1).unwrap();
        assert_eq!(q.atoms(), &[0.3]);
    }

    #[test]
    fn truncated_normal_matches_quadrature() {
        let d = AnalyticDistribution::trunc_normal(0.0, 1.0, -3.0, 3.0).unwrap();
        let q = quantize(&d.clone().into(), 10).unwrap();
        let oracle = oracle_cell_means(&d, 10);
        for (i, (x, o)) in q.atoms().iter().zip(&oracle).enumerate() {
            assert!((x - o).abs() < 1e-9, "cell {i}: {x} vs {o}");
            assert!((x + q.atoms()[9 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_matches_quadrature_and_is_dominated() {
        let d = AnalyticDistribution::mixture(vec![
            (0.5, AnalyticDistribution::normal(-0.5, 0.8).unwrap()),
            (0.5, AnalyticDistribution::logistic(0.5, 0.4).unwrap()),
        ])
        .unwrap();
        let q = quantize(&d.clone().into(), 50).unwrap();
        let oracle = oracle_cell_means(&d, 50);
        // The end cells carry unbounded tails; compare the interior only.
        for (x, o) in q.atoms().iter().zip(&oracle).skip(1).take(48) {
            assert!((x - o).abs() < 1e-8, "{x} vs {o}");
        }
        assert!(convex_order_leq(&q.into(), &d.into(), 1e-9));
    }

    #[test]
    fn rejects_zero_cells() {
        let u: Measure = AnalyticDistribution::uniform(0.0, 1.0).unwrap().into();
        assert!(quantize(&u, 0).is_err());
    }
}
