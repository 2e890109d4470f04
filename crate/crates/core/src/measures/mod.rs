//! Probability measures on the line: discrete and closed-form laws, quantile
//! states, potential functions, convex order, irreducible components,
//! quantization and Wasserstein metrics.

mod analytic;
mod discrete;
mod ks;
mod potential;
mod quantile;
mod quantize;
mod wasserstein;

pub use analytic::{AnalyticDistribution, MixtureComponent};
pub use discrete::{DiscreteMeasure, MASS_TOL, MERGE_RTOL};
pub use ks::ks_distance;
pub use potential::{
    convex_order_leq, irreducible_components, is_irreducible, potential_grid, Component, PotentialFunction,
    DEFAULT_FILL_POINTS,
};
pub use quantile::{Interpolation, QuantileGrid, StepQuantile};
pub use quantize::{quantize, quantize_on};
pub use wasserstein::{w1, w_infinity, w_infinity_mod_shift, ShiftedDistance};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Either a finitely supported measure or a closed-form law.
///
/// Serializes to a single JSON object tagged by `"type"`:
/// `"discrete"` (fields `atoms`, `weights`) or one of the
/// [`AnalyticDistribution`] tags.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Analytic(AnalyticDistribution),
}

impl From<DiscreteMeasure> for Measure {
    fn from(d: DiscreteMeasure) -> Self {
        Measure::Discrete(d)
    }
}

impl From<AnalyticDistribution> for Measure {
    fn from(d: AnalyticDistribution) -> Self {
        Measure::Analytic(d)
    }
}

impl Measure {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Measure::Discrete(d) => d.cdf(x),
            Measure::Analytic(a) => a.cdf(x),
        }
    }

    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Measure::Discrete(d) => d.cdf_left(x),
            Measure::Analytic(a) => a.cdf_left(x),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Measure::Discrete(d) => d.quantile(u),
            Measure::Analytic(a) => a.quantile(u),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Measure::Discrete(d) => d.mean(),
            Measure::Analytic(a) => a.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Measure::Discrete(d) => d.variance(),
            Measure::Analytic(a) => a.variance(),
        }
    }

    /// `E[(x − X)^+] = ∫_{-∞}^x F`.
    pub fn put(&self, x: f64) -> f64 {
        match self {
            Measure::Discrete(d) => d.put(x),
            Measure::Analytic(a) => a.put(x),
        }
    }

    /// `E[(X − x)^+]`.
    pub fn call(&self, x: f64) -> f64 {
        self.put(x) - (x - self.mean())
    }

    /// Potential `u(x) = E|x − X|`.
    pub fn potential(&self, x: f64) -> f64 {
        2.0 * self.put(x) - (x - self.mean())
    }

    /// `∫_0^u Q(s) ds`.
    pub fn integrated_quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.mean();
        }
        let q = self.quantile(u);
        u * q - self.put(q)
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Measure::Discrete(d) => d.support(),
            Measure::Analytic(a) => a.support(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (lo, hi) = self.support();
        lo.is_finite() && hi.is_finite()
    }

    /// Atoms, family breakpoints and support ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Measure::Discrete(d) => d.atoms().to_vec(),
            Measure::Analytic(a) => a.breakpoints(),
        }
    }

    /// Cumulative weights at which the quantile jumps (discrete laws only).
    pub fn jump_levels(&self) -> Vec<f64> {
        match self {
            Measure::Discrete(d) => d.cumulative(),
            Measure::Analytic(_) => vec![],
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteMeasure> {
        match self {
            Measure::Discrete(d) => Some(d),
            Measure::Analytic(_) => None,
        }
    }

    pub fn as_analytic(&self) -> Option<&AnalyticDistribution> {
        match self {
            Measure::Discrete(_) => None,
            Measure::Analytic(a) => Some(a),
        }
    }

    /// Law of `scale·X + shift`, `scale > 0`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        match self {
            Measure::Discrete(d) => Measure::Discrete(d.affine(scale, shift)),
            Measure::Analytic(a) => Measure::Analytic(a.affine(scale, shift)),
        }
    }

    /// Centre of symmetry if `Q(u) + Q(1−u)` is constant on a probe grid.
    pub fn symmetry_center(&self, tol: f64) -> Option<f64> {
        let probes: Vec<f64> = match self {
            // Midpoints of the cells are enough for a step quantile.
            Measure::Discrete(d) => {
                let p = d.cumulative();
                p.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            }
            Measure::Analytic(_) => (1..64).map(|k| k as f64 / 64.0).collect(),
        };
        let c = 0.5 * (self.quantile(0.5 - 1e-9) + self.quantile(0.5 + 1e-9));
        match self {
            Measure::Discrete(d) => {
                let (x, w) = (d.atoms(), d.weights());
                let n = x.len();
                let ok = (0..n).all(|i| {
                    (x[i] + x[n - 1 - i] - 2.0 * c).abs() <= tol && (w[i] - w[n - 1 - i]).abs() <= tol
                });
                ok.then_some(c)
            }
            Measure::Analytic(_) => probes
                .iter()
                .all(|&u| (self.quantile(u) + self.quantile(1.0 - u) - 2.0 * c).abs() <= tol)
                .then_some(c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Measure::Discrete(_) => Ok(()),
            Measure::Analytic(a) => a.validate(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum DiscreteTagged {
    Discrete(DiscreteMeasure),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MeasureRepr {
    Discrete(DiscreteTagged),
    Analytic(AnalyticDistribution),
}

impl Serialize for Measure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Measure::Discrete(d) => DiscreteTagged::Discrete(d.clone()).serialize(s),
            Measure::Analytic(a) => a.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = match MeasureRepr::deserialize(d)? {
            MeasureRepr::Discrete(DiscreteTagged::Discrete(m)) => Measure::Discrete(m),
            MeasureRepr::Analytic(a) => Measure::Analytic(a),
        };
        m.validate().map_err(serde::de::Error::custom)?;
        Ok(m)
    }
}

/// Parses a measure from JSON, reporting the byte offset of any syntax error.
pub fn measure_from_json(text: &str) -> Result<Measure> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: crate::market_io::byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_tagging() {
        let d: Measure = serde_json::from_str(r#"{"type":"discrete","atoms":[1.0,0.0],"weights":[0.5,0.5]}"#).unwrap();
        assert_eq!(d.as_discrete().unwrap().atoms(), &[0.0, 1.0]);
        let u: Measure = serde_json::from_str(r#"{"type":"uniform","lo":-1.0,"hi":1.0}"#).unwrap();
        assert!(u.as_analytic().is_some());
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains(r#""type":"discrete""#));
        assert_eq!(serde_json::from_str::<Measure>(&s).unwrap(), d);
        assert!(serde_json::from_str::<Measure>(r#"{"type":"uniform","lo":1.0,"hi":-1.0}"#).is_err());
    }

    #[test]
    fn potential_bounds() {
        let m: Measure = AnalyticDistribution::uniform(-1.0, 3.0).unwrap().into();
        for k in 0..40 {
            let x = -3.0 + 0.2 * k as f64;
            assert!(m.potential(x) >= (x - m.mean()).abs() - 1e-14);
        }
        // u(x) for Unif[-1,1] at 0 is 1/2.
        let m: Measure = AnalyticDistribution::uniform(-1.0, 1.0).unwrap().into();
        assert!((m.potential(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integrated_quantile_of_discrete() {
        let m: Measure = DiscreteMeasure::new(vec![0.0, 2.0], vec![0.25, 0.75]).unwrap().into();
        assert!((m.integrated_quantile(0.5) - 0.5).abs() < 1e-15);
        assert!((m.integrated_quantile(1.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn symmetry_detection() {
        let m: Measure = DiscreteMeasure::uniform(vec![-1.0, 0.5, 2.0]).unwrap().into();
        assert_eq!(m.symmetry_center(1e-12), Some(0.5));
        let m: Measure = DiscreteMeasure::new(vec![-1.0, 1.0], vec![0.3, 0.7]).unwrap().into();
        assert_eq!(m.symmetry_center(1e-12), None);
        let m: Measure = AnalyticDistribution::trunc_normal(1.0, 1.0, -1.0, 3.0).unwrap().into();
        assert!((m.symmetry_center(1e-9).unwrap() - 1.0).abs() < 1e-9);
    }
}
