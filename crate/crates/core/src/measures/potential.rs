//! Potential functions `u_ξ(x) = ∫|x − y| ξ(dy)`, convex order and the
//! decomposition of a pair into irreducible components.
//!
//! Potentials are compared on a candidate grid made of every atom and family
//! breakpoint, the points `Q_ν(p_j)` at the cumulative weights `p_j` of a
//! discrete `μ` (and symmetrically `Q_μ` at the weights of a discrete `ν`),
//! plus uniform fill points. Between consecutive atoms of a discrete `μ` the
//! gap `u_ν − u_μ` is convex and minimised at one of those points, so the
//! grid brackets every sign change exactly in the semidiscrete case.

use serde::{Deserialize, Serialize};

use super::Measure;
use crate::error::{Error, Result};

pub const DEFAULT_FILL_POINTS: usize = 512;

/// `x ↦ E|x − X|` for a fixed law.
#[derive(Debug, Clone)]
pub struct PotentialFunction<'a> {
    measure: &'a Measure,
    mean: f64,
}

impl<'a> PotentialFunction<'a> {
    pub fn new(measure: &'a Measure) -> Self {
        Self { measure, mean: measure.mean() }
    }

    pub fn eval(&self, x: f64) -> f64 {
        2.0 * self.measure.put(x) - (x - self.mean)
    }

    /// Right derivative `2F(x) − 1`.
    pub fn slope(&self, x: f64) -> f64 {
        2.0 * self.measure.cdf(x) - 1.0
    }

    /// Kinks of the potential (the atoms) for a discrete law.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.measure {
            Measure::Discrete(d) => d.atoms().to_vec(),
            Measure::Analytic(a) => a.atoms().into_iter().map(|(x, _)| x).collect(),
        }
    }
}

fn finite_hull(m: &Measure) -> (f64, f64) {
    let (lo, hi) = m.support();
    let lo = if lo.is_finite() { lo } else { m.quantile(1e-12) };
    let hi = if hi.is_finite() { hi } else { m.quantile(1.0 - 1e-12) };
    (lo, hi)
}

/// Sorted, de-duplicated evaluation points for comparing `u_μ` and `u_ν`.
pub fn potential_grid(mu: &Measure, nu: &Measure, fill: usize) -> Vec<f64> {
    let mut pts = mu.breakpoints();
    pts.extend(nu.breakpoints());
    for p in mu.jump_levels() {
        if p > 0.0 && p < 1.0 {
            pts.push(nu.quantile(p));
        }
    }
    for p in nu.jump_levels() {
        if p > 0.0 && p < 1.0 {
            pts.push(mu.quantile(p));
        }
    }
    let (a0, b0) = finite_hull(mu);
    let (a1, b1) = finite_hull(nu);
    let (lo, hi) = (a0.min(a1), b0.max(b1));
    pts.push(lo);
    pts.push(hi);
    if fill > 1 && hi > lo {
        pts.extend((0..fill).map(|k| lo + (hi - lo) * k as f64 / (fill - 1) as f64));
    }
    pts.retain(|x| x.is_finite());
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1.0));
    pts
}

/// `μ ⪯_c ν` up to `tol`: equal means and `u_μ ≤ u_ν + tol` on the
/// candidate grid.
pub fn convex_order_leq(mu: &Measure, nu: &Measure, tol: f64) -> bool {
    if (mu.mean() - nu.mean()).abs() > tol {
        return false;
    }
    let (pm, pn) = (PotentialFunction::new(mu), PotentialFunction::new(nu));
    potential_grid(mu, nu, DEFAULT_FILL_POINTS)
        .into_iter()
        .all(|x| pm.eval(x) <= pn.eval(x) + tol)
}

/// A maximal open interval on which `u_ν > u_μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub lo: f64,
    pub hi: f64,
    /// `μ((lo, hi))`.
    pub mu_mass: f64,
    /// `ν((lo, hi))`.
    pub nu_mass: f64,
}

impl Component {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

/// Irreducible components of `(μ, ν)`. The pair is irreducible iff the result
/// is a single component carrying all of `μ`'s mass.
///
/// Component ends are snapped to grid points where the potentials agree to
/// within `tol`.
pub fn irreducible_components(mu: &Measure, nu: &Measure, tol: f64) -> Result<Vec<Component>> {
    if !convex_order_leq(mu, nu, tol) {
        return Err(Error::domain("irreducible components need μ ⪯_c ν"));
    }
    let (pm, pn) = (PotentialFunction::new(mu), PotentialFunction::new(nu));
    let grid = potential_grid(mu, nu, DEFAULT_FILL_POINTS);
    let positive: Vec<bool> = grid.iter().map(|&x| pn.eval(x) - pm.eval(x) > tol).collect();

    let mut comps = Vec::new();
    let mut k = 0;
    while k < grid.len() {
        if !positive[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < grid.len() && positive[k] {
            k += 1;
        }
        // Outside the hull of both supports the potentials coincide, so a
        // run never touches the ends of the grid unless tol is tiny.
        let lo = if start > 0 { grid[start - 1] } else { grid[start] };
        let hi = if k < grid.len() { grid[k] } else { grid[k - 1] };
        comps.push(Component {
            lo,
            hi,
            mu_mass: (mu.cdf_left(hi) - mu.cdf(lo)).max(0.0),
            nu_mass: (nu.cdf_left(hi) - nu.cdf(lo)).max(0.0),
        });
    }
    Ok(comps)
}

/// Whether the pair is irreducible under [`irreducible_components`].
pub fn is_irreducible(mu: &Measure, nu: &Measure, tol: f64) -> Result<bool> {
    let comps = irreducible_components(mu, nu, tol)?;
    Ok(comps.len() == 1 && comps[0].mu_mass >= 1.0 - 1e-9)
}
