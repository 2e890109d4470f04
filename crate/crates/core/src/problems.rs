//! Bundled test problems shared by the tests, the benches and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{FixedPointProblem, SolverConfig};
use crate::measures::{quantize, AnalyticDistribution, DiscreteMeasure, Measure};

/// A fixed-point problem in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub mu: Measure,
    /// Atoms used to quantize `mu` when it is a closed-form law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<usize>,
    pub nu: AnalyticDistribution,
    #[serde(default = "unit_time")]
    pub time: f64,
}

fn unit_time() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn discrete_mu(&self) -> Result<DiscreteMeasure> {
        match (&self.mu, self.atoms) {
            (Measure::Discrete(d), _) => Ok(d.clone()),
            (m @ Measure::Analytic(_), Some(n)) => quantize(m, n),
            (Measure::Analytic(_), None) => Err(Error::domain(format!(
                "problem {}: a closed-form start law needs an atom count",
                self.name
            ))),
        }
    }

    pub fn build(&self, config: SolverConfig) -> Result<FixedPointProblem> {
        FixedPointProblem::new(self.discrete_mu()?, self.nu.clone(), self.time, config)
    }
}

/// `μ = ½δ_{−b} + ½δ_b`, `ν = Unif[−a, a]`.
pub fn two_point(a: f64, b: f64) -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        name: format!("two_point_a{a}_b{b}"),
        mu: DiscreteMeasure::uniform(vec![-b, b])?.into(),
        atoms: None,
        nu: AnalyticDistribution::uniform(-a, a)?,
        time: 1.0,
    })
}

/// `μ = δ_0`, `ν = Unif[−a, a]`; the fixed point is `δ_0`.
pub fn bass(a: f64) -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        name: format!("bass_a{a}"),
        mu: DiscreteMeasure::dirac(0.0).into(),
        atoms: None,
        nu: AnalyticDistribution::uniform(-a, a)?,
        time: 1.0,
    })
}

/// Equal mixture of `N(−½, 0.8²)` and a logistic law with location ½ and
/// scale 0.4, against a truncated normal.
pub fn normal_logistic_mixture(atoms: usize) -> Result<ProblemSpec> {
    let mu = AnalyticDistribution::mixture(vec![
        (0.5, AnalyticDistribution::normal(-0.5, 0.8)?),
        (0.5, AnalyticDistribution::logistic(0.5, 0.4)?),
    ])?;
    Ok(ProblemSpec {
        name: format!("normal_logistic_{atoms}"),
        mu: mu.into(),
        atoms: Some(atoms),
        nu: AnalyticDistribution::trunc_normal(0.0, 1.5, -4.0, 4.0)?,
        time: 1.0,
    })
}

/// Half-width of the window shared by both laws of the ramp.
pub const RAMP_WINDOW: f64 = 3.0;

/// `μ = TN(0, 1)` quantized to 10 atoms against `ν = TN(0, σ)` on the same
/// window. The pair degenerates as `σ ↓ 1`.
pub fn truncated_normal_ramp_point(sigma: f64) -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        name: format!("tn_ramp_{sigma}"),
        mu: AnalyticDistribution::trunc_normal(0.0, 1.0, -RAMP_WINDOW, RAMP_WINDOW)?.into(),
        atoms: Some(10),
        nu: AnalyticDistribution::trunc_normal(0.0, sigma, -RAMP_WINDOW, RAMP_WINDOW)?,
        time: 1.0,
    })
}

/// Ramp points with the degenerate end point `σ ≤ 1` dropped.
pub fn truncated_normal_ramp(sigmas: &[f64]) -> Result<Vec<ProblemSpec>> {
    sigmas.iter().filter(|s| **s > 1.0).map(|s| truncated_normal_ramp_point(*s)).collect()
}

/// The mixture start law at the given resolution; `atoms == 1` gives `δ_0`.
pub fn atom_family(atoms: usize) -> Result<ProblemSpec> {
    normal_logistic_mixture(atoms).map(|p| ProblemSpec { name: format!("atoms_{atoms}"), ..p })
}

/// Atom counts of [`atom_family`] in the bundled set.
pub const ATOM_COUNTS: [usize; 5] = [1, 2, 4, 10, 50];

/// Every bundled problem: the closed-form cases, the atom family and the
/// ramp.
pub fn bundled() -> Result<Vec<ProblemSpec>> {
    let mut out = vec![two_point(1.0, 0.25)?, bass(1.0)?];
    for n in ATOM_COUNTS {
        out.push(atom_family(n)?);
    }
    out.extend(truncated_normal_ramp(&[1.5, 1.3, 1.1, 1.05])?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_problems_build() {
        for p in bundled().unwrap() {
            let fp = p.build(SolverConfig::default()).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert!(fp.is_irreducible(), "{}", p.name);
        }
    }

    #[test]
    fn degenerate_ramp_end_is_dropped() {
        assert_eq!(truncated_normal_ramp(&[1.2, 1.0]).unwrap().len(), 1);
    }

    #[test]
    fn json_round_trip() {
        let p = normal_logistic_mixture(50).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ProblemSpec>(&s).unwrap(), p);
        let mut bad = p.clone();
        bad.atoms = None;
        assert!(bad.discrete_mu().is_err());
    }
}
