//! Wasserstein distances on the line, computed through quantile functions.
//!
//! Pairs of discrete measures are handled exactly on the merged partition of
//! their cumulative weights. When a closed-form law is involved the quantile
//! difference is sampled at every jump level plus a uniform fill grid, using
//! one-sided limits on each elementary cell.

use serde::{Deserialize, Serialize};

use super::{Measure, StepQuantile};
use crate::error::{Error, Result};
use crate::gauss_kernel::GaussLegendre;

const FILL: usize = 4096;

/// `min_c ‖Q_a − Q_b − c‖_∞` and its minimiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedDistance {
    pub distance: f64,
    pub shift: f64,
}

impl ShiftedDistance {
    /// From the range `[lo, hi]` of `Q_a − Q_b`.
    pub fn from_range(lo: f64, hi: f64) -> Self {
        Self { distance: 0.5 * (hi - lo), shift: 0.5 * (hi + lo) }
    }
}

fn require_bounded(a: &Measure, b: &Measure) -> Result<()> {
    if a.is_bounded() && b.is_bounded() {
        Ok(())
    } else {
        Err(Error::domain("W∞ needs compactly supported measures"))
    }
}

/// Range `(inf, sup)` of `Q_a − Q_b` over (0, 1).
fn difference_range(a: &Measure, b: &Measure) -> (f64, f64) {
    if let (Measure::Discrete(x), Measure::Discrete(y)) = (a, b) {
        return StepQuantile::from_measure(x).difference_range(&StepQuantile::from_measure(y));
    }
    let mut us: Vec<f64> = (0..=FILL).map(|k| k as f64 / FILL as f64).collect();
    us.extend(a.jump_levels());
    us.extend(b.jump_levels());
    us.sort_by(f64::total_cmp);
    us.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for w in us.windows(2) {
        let eta = 1e-9 * (w[1] - w[0]);
        for u in [w[0] + eta, w[1] - eta] {
            let d = a.quantile(u) - b.quantile(u);
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    (lo, hi)
}

/// `ess sup_u |Q_a(u) − Q_b(u)|`.
pub fn w_infinity(a: &Measure, b: &Measure) -> Result<f64> {
    require_bounded(a, b)?;
    let (lo, hi) = difference_range(a, b);
    Ok(lo.abs().max(hi.abs()))
}

/// Distance modulo translation: `c` is the midpoint of the range of
/// `Q_a − Q_b`, so that `a` shifted by `−c` is closest to `b`.
pub fn w_infinity_mod_shift(a: &Measure, b: &Measure) -> Result<ShiftedDistance> {
    require_bounded(a, b)?;
    let (lo, hi) = difference_range(a, b);
    Ok(ShiftedDistance::from_range(lo, hi))
}

fn finite_end(m: &Measure, low: bool) -> f64 {
    let (lo, hi) = m.support();
    match (low, lo.is_finite(), hi.is_finite()) {
        (true, true, _) => lo,
        (true, false, _) => m.quantile(1e-15),
        (false, _, true) => hi,
        (false, _, false) => m.quantile(1.0 - 1e-15),
    }
}

/// `W₁(a, b) = ∫ |F_a − F_b| dx`.
pub fn w1(a: &Measure, b: &Measure) -> f64 {
    if let (Measure::Discrete(x), Measure::Discrete(y)) = (a, b) {
        // Both CDFs are constant between consecutive atoms.
        let mut pts: Vec<f64> = x.atoms().iter().chain(y.atoms()).copied().collect();
        pts.sort_by(f64::total_cmp);
        return pts.windows(2).map(|w| (w[1] - w[0]) * (x.cdf(w[0]) - y.cdf(w[0])).abs()).sum();
    }
    let lo = finite_end(a, true).min(finite_end(b, true));
    let hi = finite_end(a, false).max(finite_end(b, false));
    let mut pts: Vec<f64> = a.breakpoints().into_iter().chain(b.breakpoints()).filter(|x| x.is_finite()).collect();
    pts.push(lo);
    pts.push(hi);
    pts.retain(|x| *x >= lo && *x <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let gl = GaussLegendre::new(16).expect("16-point rule");
    let span = hi - lo;
    pts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let pieces = ((2048.0 * (w[1] - w[0]) / span).ceil() as usize).clamp(4, 2048);
            gl.integrate_composite(w[0], w[1], pieces, |x| (a.cdf(x) - b.cdf(x)).abs())
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{AnalyticDistribution, DiscreteMeasure};
    use proptest::prelude::*;

    fn disc(xs: &[f64]) -> Measure {
        DiscreteMeasure::uniform(xs.to_vec()).unwrap().into()
    }

    #[test]
    fn point_masses() {
        let (a, b) = (disc(&[0.0]), disc(&[1.0]));
        assert_eq!(w_infinity(&a, &b).unwrap(), 1.0);
        let s = w_infinity_mod_shift(&a, &b).unwrap();
        assert_eq!((s.distance, s.shift), (0.0, -1.0));
        assert_eq!(w1(&a, &b), 1.0);
    }

    #[test]
    fn identical_uniforms() {
        let u: Measure = AnalyticDistribution::uniform(0.0, 1.0).unwrap().into();
        assert!(w_infinity(&u, &u).unwrap() < 1e-15);
        assert!(w1(&u, &u) < 1e-15);
    }

    #[test]
    fn translate_has_zero_shifted_distance() {
        let a: Measure = AnalyticDistribution::trunc_normal(0.0, 1.0, -2.0, 2.0).unwrap().into();
        let b = a.affine(1.0, 3.0);
        let s = w_infinity_mod_shift(&a, &b).unwrap();
        assert!(s.distance < 1e-12);
        assert!((s.shift + 3.0).abs() < 1e-12);
        assert!((w1(&a, &b) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn half_range_formula() {
        let s = ShiftedDistance::from_range(-0.2, 0.6);
        assert!((s.distance - 0.4).abs() < 1e-15 && (s.shift - 0.2).abs() < 1e-15);
    }

    #[test]
    fn unbounded_support_is_domain_error() {
        let n: Measure = AnalyticDistribution::normal(0.0, 1.0).unwrap().into();
        assert!(matches!(w_infinity(&n, &n), Err(Error::Domain(_))));
    }

    #[test]
    fn uniform_vs_its_quantization() {
        let u: Measure = AnalyticDistribution::uniform(0.0, 1.0).unwrap().into();
        let q: Measure = crate::measures::quantize(&u, 4).unwrap().into();
        assert!((w_infinity(&u, &q).unwrap() - 0.125).abs() < 1e-9);
        // Each cell contributes 2·(1/8)²/2.
        assert!((w1(&u, &q) - 4.0 * (0.125f64).powi(2)).abs() < 1e-10);
    }

    /// Minimal sup-cost over all bijections between equal-weight atoms.
    fn brute_force(x: &[f64], y: &[f64]) -> f64 {
        fn rec(x: &[f64], y: &mut Vec<f64>, k: usize, cur: f64, best: &mut f64) {
            if k == x.len() {
                *best = best.min(cur);
                return;
            }
            for j in k..y.len() {
                y.swap(k, j);
                rec(x, y, k + 1, cur.max((x[k] - y[k]).abs()), best);
                y.swap(k, j);
            }
        }
        let mut best = f64::INFINITY;
        rec(x, &mut y.to_vec(), 0, 0.0, &mut best);
        best
    }

    proptest! {
        #[test]
        fn quantile_formula_matches_brute_force(
            x in prop::collection::vec(-5.0f64..5.0, 3),
            y in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let d = w_infinity(&disc(&x), &disc(&y)).unwrap();
            prop_assert!((d - brute_force(&x, &y)).abs() < 1e-12);
        }

        #[test]
        fn triangle_and_shift_bound(
            x in prop::collection::vec(-5.0f64..5.0, 1..6),
            y in prop::collection::vec(-5.0f64..5.0, 1..6),
            z in prop::collection::vec(-5.0f64..5.0, 1..6),
        ) {
            let (a, b, c) = (disc(&x), disc(&y), disc(&z));
            let ab = w_infinity(&a, &b).unwrap();
            let bc = w_infinity(&b, &c).unwrap();
            let ac = w_infinity(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!(w_infinity_mod_shift(&a, &b).unwrap().distance <= ab + 1e-12);
            prop_assert!(w1(&a, &b) <= ab + 1e-12);
        }
    }
}
