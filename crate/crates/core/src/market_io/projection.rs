//! Quadratic Wasserstein projection in convex order, `argmin{W₂(μ, η) : η ⪯_c ν}`.
//!
//! On a common grid of quantile cells with weights `w`, cell values `a`
//! (for `μ`) and `b` (for `ν`), the constraint `η ⪯_c ν` reads
//! `Σ_{k≤m} w_k (z_k − b_k) ≥ 0` for every `m` with equality at the end. That
//! set is a cone around `b` whose polar is the nondecreasing sequences, so the
//! projection onto it is `z = a − iso_w(a − b)` with `iso_w` the weighted
//! isotonic regression. When that `z` is not itself nondecreasing, the
//! intersection with the monotone cone is found by Dykstra's alternating
//! projections.

use crate::error::{Error, Result};
use crate::measures::{quantize_on, DiscreteMeasure, Measure};

/// Weighted nondecreasing least-squares fit by pool-adjacent-violators.
pub fn isotonic_regression(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // Blocks of (mean, weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (v, w) in values.iter().zip(weights) {
        blocks.push((*v, *w, 1));
        while blocks.len() > 1 {
            let (m2, w2, n2) = blocks[blocks.len() - 1];
            let (m1, w1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, n1 + n2));
        }
    }
    blocks.into_iter().flat_map(|(m, _, n)| std::iter::repeat(m).take(n)).collect()
}

/// Projection on a fixed cell grid: returns `z` with `Σ w (z − a)²` minimal
/// subject to the convex-order constraints against `b`.
pub fn project_on_grid(weights: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != a.len() || a.len() != b.len() || a.is_empty() {
        return Err(Error::domain("projection needs equal-length non-empty cells"));
    }
    let z = project_dominated(weights, a, b);
    if z.windows(2).all(|p| p[0] <= p[1]) {
        return Ok(z);
    }
    let n = a.len();
    let mut x = a.to_vec();
    let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..DYKSTRA_MAX_ITERS {
        let xp: Vec<f64> = (0..n).map(|k| x[k] + p[k]).collect();
        let y = project_dominated(weights, &xp, b);
        let yq: Vec<f64> = (0..n).map(|k| y[k] + q[k]).collect();
        let next = isotonic_regression(&yq, weights);
        for k in 0..n {
            p[k] = xp[k] - y[k];
            q[k] = yq[k] - next[k];
        }
        let step = (0..n).map(|k| (next[k] - x[k]).abs()).fold(0.0, f64::max);
        let gap = (0..n).map(|k| (next[k] - y[k]).abs()).fold(0.0, f64::max);
        x = next;
        if step <= 1e-15 && gap <= 1e-13 {
            return Ok(x);
        }
    }
    Err(Error::numeric("convex-order projection did not converge"))
}

const DYKSTRA_MAX_ITERS: usize = 1_000_000;

/// Projection onto the prefix-sum constraints alone.
fn project_dominated(weights: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let c: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let iso = isotonic_regression(&c, weights);
    a.iter().zip(&iso).map(|(x, i)| x - i).collect()
}

/// Projects `mu` onto `{η ⪯_c nu}` for a discrete `nu`. A closed-form `mu` is
/// first replaced by its cell means on `fill` equal cells refined by the jump
/// levels of `nu`.
pub fn project_convex_order(mu: &Measure, nu: &DiscreteMeasure, fill: usize, tol: f64) -> Result<DiscreteMeasure> {
    let (mm, mn) = (mu.mean(), nu.mean());
    if !((mm - mn).abs() <= tol) {
        return Err(Error::domain(format!("projection needs equal means ({mm} vs {mn})")));
    }
    let mut levels: Vec<f64> = nu.cumulative();
    match mu {
        Measure::Discrete(d) => levels.extend(d.cumulative()),
        Measure::Analytic(_) => levels.extend((1..fill.max(1)).map(|k| k as f64 / fill as f64)),
    }
    levels.push(1.0);
    levels.retain(|u| *u > 0.0 && *u <= 1.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|x, y| (*x - *y).abs() <= 1e-13);
    *levels.last_mut().unwrap() = 1.0;
    let mut weights = Vec::with_capacity(levels.len());
    let mut prev = 0.0;
    for u in &levels {
        weights.push(u - prev);
        prev = *u;
    }
    let mids: Vec<f64> = levels.iter().zip(&weights).map(|(u, w)| u - 0.5 * w).collect();
    let a = quantize_on(mu, &weights)?;
    // quantize_on merges coincident cell means, so expand back onto the cells.
    let a: Vec<f64> = mids.iter().map(|u| a.quantile(*u)).collect();
    let b: Vec<f64> = mids.iter().map(|u| nu.quantile(*u)).collect();
    let z = project_on_grid(&weights, &a, &b)?;
    DiscreteMeasure::new(z, weights)
}
