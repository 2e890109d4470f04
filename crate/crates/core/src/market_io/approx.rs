//! Irreducible pairs with densities approximating a given pair in convex
//! order.
//!
//! With `ν̂_n` the `n`-point quantization of `ν`, `R_n` the largest `|x|` on
//! its support, `λ_R = Unif[−R, R]` and `ε_n = 1/(n R_n)`:
//!
//! ```text
//! ν_n = ε_n λ_{R_n} + (1 − ε_n)(ν̂_n ∗ λ_{1/n})
//! μ_n = ε_n δ_0     + (1 − ε_n) μ̂_n
//! ```
//!
//! where `μ̂_n` is the projection of `μ` onto `{η ⪯_c ν̂_n}`.

use serde::{Deserialize, Serialize};

use super::projection::project_convex_order;
use crate::error::{Error, Result};
use crate::measures::{quantize, AnalyticDistribution, DiscreteMeasure, Measure};

/// Cells used to discretise a closed-form `μ` before projecting.
const PROJECTION_CELLS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximatePair {
    pub mu_n: DiscreteMeasure,
    pub nu_n: AnalyticDistribution,
    pub mu_hat: DiscreteMeasure,
    pub nu_hat: DiscreteMeasure,
    pub radius: f64,
    /// Weight `1/(n R_n)` of the added uniform and point mass.
    pub epsilon: f64,
}

pub fn approximate_irreducible_pair(mu: &Measure, nu: &Measure, n: usize, tol: f64) -> Result<ApproximatePair> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let nu_hat = quantize(nu, n)?;
    let radius = nu_hat.atoms().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let epsilon = 1.0 / (n as f64 * radius);
    if !(epsilon < 1.0) {
        return Err(Error::domain(format!("n·R_n = {} must exceed 1", n as f64 * radius)));
    }
    let mu_hat = project_convex_order(mu, &nu_hat, PROJECTION_CELLS, tol)?;

    let h = 1.0 / n as f64;
    let mut parts = vec![(epsilon, AnalyticDistribution::uniform(-radius, radius)?)];
    for (x, w) in nu_hat.atoms().iter().zip(nu_hat.weights()) {
        parts.push(((1.0 - epsilon) * w, AnalyticDistribution::uniform(x - h, x + h)?));
    }
    let nu_n = AnalyticDistribution::mixture(parts)?;

    let mut atoms = vec![0.0];
    let mut weights = vec![epsilon];
    for (x, w) in mu_hat.atoms().iter().zip(mu_hat.weights()) {
        atoms.push(*x);
        weights.push((1.0 - epsilon) * w);
    }
    let mu_n = DiscreteMeasure::new(atoms, weights)?;
    Ok(ApproximatePair { mu_n, nu_n, mu_hat, nu_hat, radius, epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{convex_order_leq, is_irreducible};

    #[test]
    fn point_mass_start_has_the_stated_floor() {
        let nu: Measure = AnalyticDistribution::mixture(vec![
            (0.5, AnalyticDistribution::uniform(-2.0, -1.0).unwrap()),
            (0.5, AnalyticDistribution::uniform(1.0, 2.0).unwrap()),
        ])
        .unwrap()
        .into();
        let mu: Measure = DiscreteMeasure::dirac(0.0).into();
        let p = approximate_irreducible_pair(&mu, &nu, 4, 1e-12).unwrap();
        assert_eq!(p.mu_hat.atoms(), &[0.0]);
        assert_eq!(p.radius, 1.75);
        // 0 is covered only by the wide uniform.
        let floor = 1.0 / (2.0 * 4.0 * p.radius * p.radius);
        assert!((p.nu_n.pdf(0.0) - floor).abs() < 1e-15);
        assert!(is_irreducible(&p.mu_n.clone().into(), &p.nu_n.clone().into(), 1e-12).unwrap());
    }

    #[test]
    fn output_is_ordered_and_irreducible() {
        let nu: Measure = AnalyticDistribution::trunc_normal(0.0, 1.0, -2.0, 2.0).unwrap().into();
        let mu: Measure = AnalyticDistribution::uniform(-1.5, 1.5).unwrap().into();
        for n in [4, 8, 16] {
            let p = approximate_irreducible_pair(&mu, &nu, n, 1e-9).unwrap();
            let (m, v): (Measure, Measure) = (p.mu_n.clone().into(), p.nu_n.clone().into());
            assert!(convex_order_leq(&m, &v, 1e-10), "n={n}");
            assert!(is_irreducible(&m, &v, 1e-12).unwrap(), "n={n}");
        }
    }

    #[test]
    fn tiny_radius_is_refused() {
        let nu: Measure = AnalyticDistribution::uniform(-0.1, 0.1).unwrap().into();
        let mu: Measure = DiscreteMeasure::dirac(0.0).into();
        assert!(matches!(approximate_irreducible_pair(&mu, &nu, 2, 1e-12), Err(Error::Domain(_))));
    }
}
