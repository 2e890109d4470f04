//! Closed-form distribution families used as targets and test marginals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss_kernel::normal;

/// A distribution given by formulas rather than atoms.
///
/// Only the bounded families (`Uniform`, `TruncNormal`, point masses and
/// mixtures thereof) may serve as calibration targets; `Normal` and
/// `Logistic` exist so that unbounded laws can be quantized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnalyticDistribution {
    Uniform { lo: f64, hi: f64 },
    TruncNormal { mean: f64, stdev: f64, lo: f64, hi: f64 },
    Normal { mean: f64, stdev: f64 },
    Logistic { mean: f64, scale: f64 },
    PointMass { at: f64 },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub dist: AnalyticDistribution,
}

use AnalyticDistribution::*;

impl AnalyticDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn trunc_normal(mean: f64, stdev: f64, lo: f64, hi: f64) -> Result<Self> {
        let d = TruncNormal { mean, stdev, lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn normal(mean: f64, stdev: f64) -> Result<Self> {
        let d = Normal { mean, stdev };
        d.validate()?;
        Ok(d)
    }

    pub fn logistic(mean: f64, scale: f64) -> Result<Self> {
        let d = Logistic { mean, scale };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(at: f64) -> Self {
        PointMass { at }
    }

    pub fn mixture(parts: Vec<(f64, AnalyticDistribution)>) -> Result<Self> {
        let d = Mixture {
            components: parts
                .into_iter()
                .map(|(weight, dist)| MixtureComponent { weight, dist })
                .collect(),
        };
        d.validate()?;
        Ok(d)
    }

    /// Checks parameter ranges. Called by the constructors and after
    /// deserialization.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            Uniform { lo, hi } => {
                if !finite(&[lo, hi]) || lo >= hi {
                    return Err(Error::domain(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
                }
            }
            TruncNormal { mean, stdev, lo, hi } => {
                if !finite(&[mean, stdev, lo, hi]) || stdev <= 0.0 || lo >= hi {
                    return Err(Error::domain("trunc_normal needs stdev > 0 and lo < hi"));
                }
                let z = normal::cdf((hi - mean) / stdev) - normal::cdf((lo - mean) / stdev);
                if z <= 1e-300 {
                    return Err(Error::domain("trunc_normal window carries no mass"));
                }
            }
            Normal { mean, stdev } => {
                if !finite(&[mean, stdev]) || stdev <= 0.0 {
                    return Err(Error::domain("normal needs stdev > 0"));
                }
            }
            Logistic { mean, scale } => {
                if !finite(&[mean, scale]) || scale <= 0.0 {
                    return Err(Error::domain("logistic needs scale > 0"));
                }
            }
            PointMass { at } => {
                if !at.is_finite() {
                    return Err(Error::domain("point mass location must be finite"));
                }
            }
            Mixture { ref components } => {
                if components.is_empty() {
                    return Err(Error::domain("mixture needs at least one component"));
                }
                let mut total = 0.0;
                for c in components {
                    if !(c.weight > 0.0) || !c.weight.is_finite() {
                        return Err(Error::domain("mixture weights must be positive"));
                    }
                    total += c.weight;
                    c.dist.validate()?;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::domain(format!("mixture weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            TruncNormal { mean, stdev, lo, hi } => {
                if x <= lo {
                    0.0
                } else if x >= hi {
                    1.0
                } else {
                    let (a, z) = tn_norm(mean, stdev, lo, hi);
                    ((normal::cdf((x - mean) / stdev) - a) / z).clamp(0.0, 1.0)
                }
            }
            Normal { mean, stdev } => normal::cdf((x - mean) / stdev),
            Logistic { mean, scale } => logistic_cdf((x - mean) / scale),
            PointMass { at } => {
                if x >= at {
                    1.0
                } else {
                    0.0
                }
            }
            Mixture { ref components } => components.iter().map(|c| c.weight * c.dist.cdf(x)).sum(),
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match *self {
            PointMass { at } => {
                if x > at {
                    1.0
                } else {
                    0.0
                }
            }
            Mixture { ref components } => {
                components.iter().map(|c| c.weight * c.dist.cdf_left(x)).sum()
            }
            _ => self.cdf(x),
        }
    }

    /// Lebesgue density; zero outside the support and `+∞` at a point mass.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            TruncNormal { mean, stdev, lo, hi } => {
                if x >= lo && x <= hi {
                    let (_, z) = tn_norm(mean, stdev, lo, hi);
                    normal::pdf((x - mean) / stdev) / (stdev * z)
                } else {
                    0.0
                }
            }
            Normal { mean, stdev } => normal::pdf((x - mean) / stdev) / stdev,
            Logistic { mean, scale } => {
                let e = (-((x - mean) / scale).abs()).exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
            PointMass { at } => {
                if x == at {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Mixture { ref components } => {
                components.iter().map(|c| c.weight * c.dist.pdf(x)).sum()
            }
        }
    }

    /// Generalized inverse `inf{x : F(x) ≥ u}` for `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Uniform { lo, hi } => lo + u * (hi - lo),
            TruncNormal { mean, stdev, lo, hi } => {
                if u <= 0.0 {
                    return lo;
                }
                if u >= 1.0 {
                    return hi;
                }
                let alpha = (lo - mean) / stdev;
                let beta = (hi - mean) / stdev;
                // Work in whichever tail keeps the probabilities away from 1.
                let z = if alpha > 0.0 {
                    let (sa, sb) = (normal::sf(alpha), normal::sf(beta));
                    -normal::quantile(sa - u * (sa - sb))
                } else {
                    let (ca, cb) = (normal::cdf(alpha), normal::cdf(beta));
                    normal::quantile(ca + u * (cb - ca))
                };
                (mean + stdev * z).clamp(lo, hi)
            }
            Normal { mean, stdev } => mean + stdev * normal::quantile(u),
            Logistic { mean, scale } => {
                if u <= 0.0 {
                    f64::NEG_INFINITY
                } else if u >= 1.0 {
                    f64::INFINITY
                } else {
                    mean + scale * (u.ln() - (-u).ln_1p())
                }
            }
            PointMass { at } => at,
            Mixture { ref components } => mixture_quantile(self, components, u),
        }
    }

    /// `Q'(u) = 1 / f(Q(u))`, together with `Q(u)`. At kinks of a mixture this
    /// is the value of the density at the quantile, which is the left derivative
    /// wherever the density is left-continuous.
    pub fn quantile_with_derivative(&self, u: f64) -> (f64, f64) {
        let q = self.quantile(u);
        let dens = self.pdf(q);
        let d = if dens > 0.0 { 1.0 / dens } else { f64::INFINITY };
        (q, d)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Uniform { lo, hi } => 0.5 * (lo + hi),
            TruncNormal { mean, stdev, lo, hi } => {
                let (_, z) = tn_norm(mean, stdev, lo, hi);
                let (a, b) = ((lo - mean) / stdev, (hi - mean) / stdev);
                mean + stdev * (normal::pdf(a) - normal::pdf(b)) / z
            }
            Normal { mean, .. } | Logistic { mean, .. } => mean,
            PointMass { at } => at,
            Mixture { ref components } => components.iter().map(|c| c.weight * c.dist.mean()).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            TruncNormal { mean, stdev, lo, hi } => {
                let (_, z) = tn_norm(mean, stdev, lo, hi);
                let (a, b) = ((lo - mean) / stdev, (hi - mean) / stdev);
                let (pa, pb) = (normal::pdf(a), normal::pdf(b));
                let r = (pa - pb) / z;
                stdev * stdev * (1.0 + (a * pa - b * pb) / z - r * r)
            }
            Normal { stdev, .. } => stdev * stdev,
            Logistic { scale, .. } => (std::f64::consts::PI * scale).powi(2) / 3.0,
            PointMass { .. } => 0.0,
            Mixture { ref components } => {
                let m = self.mean();
                components
                    .iter()
                    .map(|c| c.weight * (c.dist.variance() + (c.dist.mean() - m).powi(2)))
                    .sum()
            }
        }
    }

    /// `∫_{-∞}^{x} F(s) ds = E[(x − X)^+]`.
    pub fn put(&self, x: f64) -> f64 {
        match *self {
            Uniform { lo, hi } => {
                if x <= lo {
                    0.0
                } else if x <= hi {
                    (x - lo).powi(2) / (2.0 * (hi - lo))
                } else {
                    0.5 * (hi - lo) + (x - hi)
                }
            }
            TruncNormal { mean, stdev, lo, hi } => {
                if x <= lo {
                    return 0.0;
                }
                let (a_cdf, z) = tn_norm(mean, stdev, lo, hi);
                let inside = |x: f64| {
                    let za = (lo - mean) / stdev;
                    let zx = (x - mean) / stdev;
                    (stdev * (normal::integrated_cdf(zx) - normal::integrated_cdf(za))
                        - (x - lo) * a_cdf)
                        / z
                };
                if x <= hi {
                    inside(x).max(0.0)
                } else {
                    inside(hi) + (x - hi)
                }
            }
            Normal { mean, stdev } => stdev * normal::integrated_cdf((x - mean) / stdev),
            Logistic { mean, scale } => {
                let z = (x - mean) / scale;
                scale * (z.max(0.0) + (-z.abs()).exp().ln_1p())
            }
            PointMass { at } => (x - at).max(0.0),
            Mixture { ref components } => components.iter().map(|c| c.weight * c.dist.put(x)).sum(),
        }
    }

    /// Support endpoints (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Uniform { lo, hi } | TruncNormal { lo, hi, .. } => (lo, hi),
            Normal { .. } | Logistic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            PointMass { at } => (at, at),
            Mixture { ref components } => components.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), c| {
                    let (a, b) = c.dist.support();
                    (lo.min(a), hi.max(b))
                },
            ),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (lo, hi) = self.support();
        lo.is_finite() && hi.is_finite()
    }

    /// Points where the CDF or its derivative may fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Uniform { lo, hi } | TruncNormal { lo, hi, .. } => vec![lo, hi],
            Normal { .. } | Logistic { .. } => vec![],
            PointMass { at } => vec![at],
            Mixture { ref components } => {
                let mut v: Vec<f64> = components.iter().flat_map(|c| c.dist.breakpoints()).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        }
    }

    /// Point masses carried by the law, if any.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match *self {
            PointMass { at } => vec![(at, 1.0)],
            Mixture { ref components } => components
                .iter()
                .flat_map(|c| c.dist.atoms().into_iter().map(move |(x, w)| (x, w * c.weight)))
                .collect(),
            _ => vec![],
        }
    }

    /// Law of `scale·X + shift` for `scale > 0`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        assert!(scale > 0.0, "affine scale must be positive");
        let m = |x: f64| scale * x + shift;
        match *self {
            Uniform { lo, hi } => Uniform { lo: m(lo), hi: m(hi) },
            TruncNormal { mean, stdev, lo, hi } => TruncNormal {
                mean: m(mean),
                stdev: scale * stdev,
                lo: m(lo),
                hi: m(hi),
            },
            Normal { mean, stdev } => Normal { mean: m(mean), stdev: scale * stdev },
            Logistic { mean, scale: s } => Logistic { mean: m(mean), scale: scale * s },
            PointMass { at } => PointMass { at: m(at) },
            Mixture { ref components } => Mixture {
                components: components
                    .iter()
                    .map(|c| MixtureComponent { weight: c.weight, dist: c.dist.affine(scale, shift) })
                    .collect(),
            },
        }
    }

    /// Conditional law given `X ∈ [lo, hi]`. Logistic laws have no closed
    /// truncation and are refused.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        let mass = self.cdf(hi) - self.cdf_left(lo);
        if !(lo < hi) || !(mass > 0.0) {
            return Err(Error::domain(format!("[{lo}, {hi}] carries no mass")));
        }
        let d = match *self {
            Uniform { lo: a, hi: b } => Uniform { lo: a.max(lo), hi: b.min(hi) },
            TruncNormal { mean, stdev, lo: a, hi: b } => {
                TruncNormal { mean, stdev, lo: a.max(lo), hi: b.min(hi) }
            }
            Normal { mean, stdev } => TruncNormal { mean, stdev, lo, hi },
            Logistic { .. } => return Err(Error::domain("logistic laws cannot be truncated")),
            PointMass { at } => PointMass { at },
            Mixture { ref components } => {
                let mut parts = Vec::new();
                for c in components {
                    let m = c.dist.cdf(hi) - c.dist.cdf_left(lo);
                    if m > 0.0 {
                        parts.push((c.weight * m / mass, c.dist.restrict(lo, hi)?));
                    }
                }
                let total: f64 = parts.iter().map(|p| p.0).sum();
                if parts.len() == 1 {
                    parts.pop().unwrap().1
                } else {
                    Mixture {
                        components: parts
                            .into_iter()
                            .map(|(w, dist)| MixtureComponent { weight: w / total, dist })
                            .collect(),
                    }
                }
            }
        };
        d.validate()?;
        Ok(d)
    }

    /// Infimum of the density over the support hull, estimated on `m` points.
    /// Zero if the law has atoms or an unbounded support.
    pub fn density_floor(&self, m: usize) -> f64 {
        if !self.is_bounded() || !self.atoms().is_empty() {
            return 0.0;
        }
        let (lo, hi) = self.support();
        (0..=m)
            .map(|k| lo + (hi - lo) * k as f64 / m as f64)
            .map(|x| {
                // Evaluate just inside the hull so that closed-interval
                // densities at the ends are seen from the inside.
                let eps = 1e-12 * (hi - lo);
                self.pdf(x.clamp(lo + eps, hi - eps))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn tn_norm(mean: f64, stdev: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = normal::cdf((lo - mean) / stdev);
    let b = normal::cdf((hi - mean) / stdev);
    (a, b - a)
}

fn logistic_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn mixture_quantile(d: &AnalyticDistribution, components: &[MixtureComponent], u: f64) -> f64 {
    // The mixture quantile is bracketed by the component quantiles.
    let (mut lo, mut hi) = components.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| {
        let q = c.dist.quantile(u);
        (a.min(q), b.max(q))
    });
    if !lo.is_finite() || !hi.is_finite() || lo == hi {
        return if u <= 0.0 { lo } else if u >= 1.0 { hi } else { lo };
    }
    // Bisection with Newton acceleration on F(x) − u; keeps the invariant
    // F(lo) < u ≤ F(hi) so the result is the generalized inverse.
    if d.cdf(lo) >= u {
        return lo;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = d.cdf(x) - u;
        if f >= 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + hi.abs()) {
            break;
        }
        let dens = d.pdf(x);
        let newton = if dens.is_finite() && dens > 0.0 { x - f / dens } else { f64::NAN };
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    hi
}
