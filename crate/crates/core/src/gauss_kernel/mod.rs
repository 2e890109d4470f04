//! Gaussian smoothing of monotone functions and the maps `S_Q`, `S_Q'`, `T_Q`.
//!
//! For a reference state `Q` with atoms `y_j` and cell weights `w_j`, write
//! `g(x) = Σ_j w_j Φ_t(x − y_j)` for the heat-smoothed CDF. Then
//!
//! ```text
//! S(x)    = E[ Q_ν(g(x − Z)) ]
//! S'(x)   = E[ Q_ν'(g(x − Z)) · g'(x − Z) ]
//! T(x, y) = E[ Q_ν'(g(x − Z)) · φ_t(x − y − Z) ]
//! ```
//!
//! with `Z ~ N(0, t)` handled by Gauss–Hermite quadrature, so that
//! `S'(x) = Σ_j w_j T(x, y_j)`.

pub mod normal;
mod quadrature;

pub use quadrature::{GaussHermite, GaussLegendre};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{AnalyticDistribution, Measure, QuantileGrid, Interpolation};

/// Quadrature and root-finding settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub quadrature_order: usize,
    /// Inversion stops once `|S(x) − target| ≤ root_rtol·(1 + |target|)`.
    pub root_rtol: f64,
    pub max_root_iters: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { quadrature_order: 64, root_rtol: 1e-12, max_root_iters: 200 }
    }
}

/// The centred Gaussian `γ_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernel {
    variance: f64,
    sd: f64,
}

impl HeatKernel {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::domain(format!("heat kernel variance must be positive, got {variance}")));
        }
        Ok(Self { variance, sd: variance.sqrt() })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn pdf(&self, x: f64) -> f64 {
        normal::pdf(x / self.sd) / self.sd
    }

    pub fn cdf(&self, x: f64) -> f64 {
        normal::cdf(x / self.sd)
    }

    /// `Σ_j w_j Φ_t(x − y_j)`.
    pub fn smooth_step(&self, atoms: &[f64], weights: &[f64], x: f64) -> f64 {
        atoms.iter().zip(weights).map(|(y, w)| w * normal::cdf((x - y) / self.sd)).sum()
    }

    /// `(γ_t ∗ F)(x)` for a measure `F`.
    pub fn smooth_measure(&self, f: &Measure, x: f64) -> f64 {
        match f {
            Measure::Discrete(d) => self.smooth_step(d.atoms(), d.weights(), x),
            Measure::Analytic(AnalyticDistribution::Uniform { lo, hi }) => {
                let s = self.sd;
                s / (hi - lo) * (normal::integrated_cdf((x - lo) / s) - normal::integrated_cdf((x - hi) / s))
            }
            Measure::Analytic(AnalyticDistribution::PointMass { at }) => self.cdf(x - at),
            Measure::Analytic(AnalyticDistribution::Normal { mean, stdev }) => {
                normal::cdf((x - mean) / (self.variance + stdev * stdev).sqrt())
            }
            Measure::Analytic(AnalyticDistribution::Mixture { components }) => components
                .iter()
                .map(|c| c.weight * self.smooth_measure(&Measure::Analytic(c.dist.clone()), x))
                .sum(),
            Measure::Analytic(a) => {
                // E Φ_t(x − Y) against the density, which is smooth on the
                // support of the remaining families.
                let gl = GaussLegendre::new(16).expect("16-point rule");
                let (lo, hi) = a.support();
                let lo = if lo.is_finite() { lo } else { a.quantile(1e-17) };
                let hi = if hi.is_finite() { hi } else { a.quantile(1.0 - 1e-16) };
                gl.integrate_composite(lo, hi, 256, |y| self.cdf(x - y) * a.pdf(y))
            }
        }
    }

    /// `∫_0^1 Φ_t(x − Q(u)) du` for a gridded quantile. Linear pieces are
    /// integrated in closed form.
    pub fn smooth_grid(&self, g: &QuantileGrid, x: f64) -> f64 {
        let v = g.values();
        let m = v.len();
        let h = 1.0 / m as f64;
        match g.interpolation {
            Interpolation::Step => v.iter().map(|y| h * self.cdf(x - y)).sum(),
            Interpolation::Linear => {
                let s = self.sd;
                // Constant half-cells at both ends.
                let mut acc = 0.5 * h * (self.cdf(x - v[0]) + self.cdf(x - v[m - 1]));
                for k in 0..m.saturating_sub(1) {
                    let (a, b) = (v[k], v[k + 1]);
                    if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
                        acc += h * self.cdf(x - 0.5 * (a + b));
                    } else {
                        // ∫_0^h Φ((x − a − (b−a)r/h)/s) dr
                        acc += h * s / (b - a)
                            * (normal::integrated_cdf((x - a) / s) - normal::integrated_cdf((x - b) / s));
                    }
                }
                acc
            }
        }
    }
}

/// `∫_0^1 Φ_t(x − Q(y)) dy`, the heat-smoothed CDF of `f` at `x`.
pub fn phi_convolve_cdf(f: &Measure, t: f64, x: f64) -> Result<f64> {
    Ok(HeatKernel::new(t)?.smooth_measure(f, x))
}

/// The map `S_Q` for a step reference state and a closed-form target `ν`.
#[derive(Debug, Clone)]
pub struct SMap<'a> {
    atoms: &'a [f64],
    weights: &'a [f64],
    nu: &'a AnalyticDistribution,
    kernel: HeatKernel,
    /// Gauss–Hermite nodes scaled to variance `t`, and their weights.
    z: Vec<f64>,
    zw: &'a [f64],
    config: KernelConfig,
    range: (f64, f64),
}

impl<'a> SMap<'a> {
    /// `S_Q` with both convolutions of variance `t`.
    pub fn new(
        atoms: &'a [f64],
        weights: &'a [f64],
        nu: &'a AnalyticDistribution,
        gh: &'a GaussHermite,
        t: f64,
        config: KernelConfig,
    ) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::domain("S map needs a non-empty reference state"));
        }
        if !nu.is_bounded() {
            return Err(Error::assumption("target law must have compact support"));
        }
        let kernel = HeatKernel::new(t)?;
        let z = gh.nodes().iter().map(|z| kernel.sd * z).collect();
        Ok(Self { atoms, weights, nu, kernel, z, zw: gh.weights(), config, range: nu.support() })
    }

    pub fn atoms(&self) -> &[f64] {
        self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        self.weights
    }

    pub fn variance(&self) -> f64 {
        self.kernel.variance
    }

    /// Open interval containing the range of `S`.
    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    fn g(&self, x: f64) -> f64 {
        self.kernel.smooth_step(self.atoms, self.weights, x)
    }

    fn g_and_slope(&self, x: f64) -> (f64, f64) {
        let sd = self.kernel.sd;
        let (mut g, mut gp) = (0.0, 0.0);
        for (y, w) in self.atoms.iter().zip(self.weights) {
            let u = (x - y) / sd;
            g += w * normal::cdf(u);
            gp += w * normal::pdf(u);
        }
        (g.min(1.0), gp / sd)
    }

    /// `Q_ν'(p)`, read just inside (0, 1) so that the ends stay finite.
    fn dq(&self, p: f64) -> f64 {
        let p = p.clamp(1e-300, 1.0 - f64::EPSILON / 2.0);
        self.nu.quantile_with_derivative(p).1
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let s: f64 = self.z.iter().zip(self.zw).map(|(z, w)| w * self.nu.quantile(self.g(x - z))).sum();
        if !s.is_finite() {
            return Err(Error::numeric(format!("S({x}) is not finite")));
        }
        Ok(s)
    }

    /// `(S(x), S'(x))` from one pass over the quadrature nodes.
    pub fn eval_with_derivative(&self, x: f64) -> Result<(f64, f64)> {
        let (mut s, mut ds) = (0.0, 0.0);
        for (z, w) in self.z.iter().zip(self.zw) {
            let (g, gp) = self.g_and_slope(x - z);
            s += w * self.nu.quantile(g);
            if gp > 0.0 {
                ds += w * self.dq(g) * gp;
            }
        }
        if !s.is_finite() || !ds.is_finite() {
            return Err(Error::numeric(format!("S or S' at {x} is not finite")));
        }
        Ok((s, ds))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        Ok(self.eval_with_derivative(x)?.1)
    }

    /// `T_Q(x, y)`.
    pub fn t_kernel(&self, x: f64, y: f64) -> f64 {
        self.z
            .iter()
            .zip(self.zw)
            .map(|(z, w)| {
                let k = self.kernel.pdf(x - y - z);
                if k > 0.0 {
                    w * self.dq(self.g(x - z)) * k
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `T_Q(x, y)` at every `y` in `ys`, sharing the evaluations of `g`.
    pub fn t_row(&self, x: f64, ys: &[f64]) -> Vec<f64> {
        let mut row = vec![0.0; ys.len()];
        for (z, w) in self.z.iter().zip(self.zw) {
            let dq = self.dq(self.g(x - z));
            if !dq.is_finite() {
                continue;
            }
            for (r, y) in row.iter_mut().zip(ys) {
                *r += w * dq * self.kernel.pdf(x - y - z);
            }
        }
        row
    }

    /// The unique `x` with `S(x) = target`, starting from `hint`.
    ///
    /// The bracket grows geometrically from the hint; inside it a Newton step
    /// is taken when it lands in the bracket and bisection otherwise.
    pub fn invert(&self, target: f64, hint: Option<f64>) -> Result<f64> {
        let (lo_nu, hi_nu) = self.range;
        if !(target > lo_nu && target < hi_nu) {
            return Err(Error::Range { target, lo: lo_nu, hi: hi_nu });
        }
        let tol = self.config.root_rtol * (1.0 + target.abs());
        let mut x = hint.unwrap_or_else(|| {
            let c: f64 = self.atoms.iter().zip(self.weights).map(|(a, w)| a * w).sum();
            c + (target - self.nu.mean())
        });
        let (mut s, mut ds) = self.eval_with_derivative(x)?;
        if (s - target).abs() <= tol {
            return Ok(x);
        }
        // Bracket [a, b] with S(a) < target < S(b).
        let (mut a, mut b);
        let mut step = 0.5 * self.kernel.sd;
        if s < target {
            a = x;
            b = x + step;
            loop {
                let sb = self.eval(b)?;
                if sb >= target {
                    break;
                }
                a = b;
                step *= 2.0;
                b += step;
                if step > 1e8 {
                    return Err(Error::Range { target, lo: lo_nu, hi: hi_nu });
                }
            }
        } else {
            b = x;
            a = x - step;
            loop {
                let sa = self.eval(a)?;
                if sa <= target {
                    break;
                }
                b = a;
                step *= 2.0;
                a -= step;
                if step > 1e8 {
                    return Err(Error::Range { target, lo: lo_nu, hi: hi_nu });
                }
            }
        }
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
            (s, ds) = self.eval_with_derivative(x)?;
        }
        for _ in 0..self.config.max_root_iters {
            let r = s - target;
            if r.abs() <= tol {
                return Ok(x);
            }
            if r < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let newton = x - r / ds;
            x = if ds > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
                return Ok(x);
            }
            (s, ds) = self.eval_with_derivative(x)?;
        }
        Err(Error::numeric(format!("S inversion for target {target} did not converge")))
    }

    /// Bounds on `S'` valid for every state with `‖Q‖_∞ ≤ r`, evaluated at
    /// `|x| ≤ x_max`: `ℓ·φ_{2t}(x_max + r) ≤ S' ≤ L·φ_{2t}(0)` where `ℓ` and
    /// `L` bound `Q_ν'` from below and above (the density is sampled on
    /// `density_samples` points of the hull).
    pub fn derivative_bounds(nu: &AnalyticDistribution, t: f64, r: f64, x_max: f64, density_samples: usize) -> Result<(f64, f64)> {
        let floor = nu.density_floor(density_samples);
        if !(floor > 0.0) {
            return Err(Error::assumption("target density is not bounded away from zero"));
        }
        let (lo, hi) = nu.support();
        let peak = (0..=density_samples)
            .map(|k| lo + (hi - lo) * k as f64 / density_samples as f64)
            .map(|x| nu.pdf(x.clamp(lo + 1e-12 * (hi - lo), hi - 1e-12 * (hi - lo))))
            .fold(0.0, f64::max);
        let k2 = HeatKernel::new(2.0 * t)?;
        Ok((k2.pdf(x_max + r) / peak, k2.pdf(0.0) / floor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;
    use proptest::prelude::*;

    fn gh() -> GaussHermite {
        GaussHermite::new(64).unwrap()
    }

    fn unif(a: f64) -> AnalyticDistribution {
        AnalyticDistribution::uniform(-a, a).unwrap()
    }

    #[test]
    fn convolve_point_mass_and_gaussian() {
        let d: Measure = DiscreteMeasure::dirac(0.3).into();
        for x in [-1.0, 0.0, 2.5] {
            assert!((phi_convolve_cdf(&d, 1.0, x).unwrap() - normal::cdf(x - 0.3)).abs() < 1e-16);
        }
        // Φ smoothed by Φ is Φ(·/√2).
        let n: Measure = AnalyticDistribution::normal(0.0, 1.0).unwrap().into();
        for x in [-1.5, 0.2, 1.0] {
            let v = phi_convolve_cdf(&n, 1.0, x).unwrap();
            assert!((v - normal::cdf(x / 2f64.sqrt())).abs() < 1e-15, "{x}: {v}");
        }
        // Same through the quantile integral of a wide truncated normal.
        let tn: Measure = AnalyticDistribution::trunc_normal(0.0, 1.0, -12.0, 12.0).unwrap().into();
        for x in [-1.5, 0.2, 1.0] {
            let v = phi_convolve_cdf(&tn, 1.0, x).unwrap();
            assert!((v - normal::cdf(x / 2f64.sqrt())).abs() < 1e-10, "{x}: {v}");
        }
        assert!(phi_convolve_cdf(&d, 0.0, 0.0).is_err());
    }

    #[test]
    fn uniform_against_riemann_sum() {
        let n = 1_000_000;
        let oracle: f64 = (0..n).map(|k| normal::cdf(0.5 - (k as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        let u: Measure = AnalyticDistribution::uniform(0.0, 1.0).unwrap().into();
        assert!((phi_convolve_cdf(&u, 1.0, 0.5).unwrap() - oracle).abs() < 1e-8);
        let grid = QuantileGrid::sample(10_000, |u| u, Interpolation::Linear).unwrap();
        let k = HeatKernel::new(1.0).unwrap();
        assert!((k.smooth_grid(&grid, 0.5) - oracle).abs() < 1e-8);
    }

    #[test]
    fn semigroup_on_grids() {
        let base: Measure = DiscreteMeasure::new(vec![-1.0, 0.2, 1.5], vec![0.3, 0.5, 0.2]).unwrap().into();
        let (s, t) = (0.4, 0.7);
        let ks = HeatKernel::new(s).unwrap();
        // Tabulate γ_s ∗ F as a fine linear quantile grid, then smooth again.
        let m = 20_000;
        let inv = |u: f64| {
            let (mut a, mut b) = (-12.0, 12.0);
            for _ in 0..80 {
                let c = 0.5 * (a + b);
                if ks.smooth_measure(&base, c) < u {
                    a = c;
                } else {
                    b = c;
                }
            }
            0.5 * (a + b)
        };
        let grid = QuantileGrid::sample(m, inv, Interpolation::Linear).unwrap();
        let kt = HeatKernel::new(t).unwrap();
        let kst = HeatKernel::new(s + t).unwrap();
        for x in [-1.0, 0.0, 0.7, 2.0] {
            let lhs = kt.smooth_grid(&grid, x);
            let rhs = kst.smooth_measure(&base, x);
            assert!((lhs - rhs).abs() < 1e-7, "{x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn bass_case_closed_form() {
        let (g, nu) = (gh(), unif(1.5));
        let (y, w) = ([0.4], [1.0]);
        let s = SMap::new(&y, &w, &nu, &g, 1.0, KernelConfig::default()).unwrap();
        for x in [-2.0, 0.0, 0.4, 1.3] {
            let exact = 1.5 * (2.0 * normal::cdf((x - 0.4) / 2f64.sqrt()) - 1.0);
            assert!((s.eval(x).unwrap() - exact).abs() < 1e-13);
            let dexact = 2.0 * 1.5 * HeatKernel::new(2.0).unwrap().pdf(x - 0.4);
            assert!((s.derivative(x).unwrap() - dexact).abs() < 1e-13);
            let h = 1e-5;
            let fd = (s.eval(x + h).unwrap() - s.eval(x - h).unwrap()) / (2.0 * h);
            assert!((fd - dexact).abs() < 1e-6);
        }
        assert!(s.eval(0.4).unwrap().abs() < 1e-15);
        assert!((s.invert(0.0, None).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn inversion_of_known_value() {
        let (g, nu) = (gh(), unif(1.0));
        let (y, w) = ([0.0], [1.0]);
        let s = SMap::new(&y, &w, &nu, &g, 1.0, KernelConfig::default()).unwrap();
        let target = 2.0 * normal::cdf(1.0 / 2f64.sqrt()) - 1.0;
        assert!((s.invert(target, Some(-3.0)).unwrap() - 1.0).abs() < 1e-11);
        assert!(matches!(s.invert(-1.0, None), Err(Error::Range { .. })));
        assert!(matches!(s.invert(1.2, None), Err(Error::Range { .. })));
    }

    #[test]
    fn two_atoms_closed_form() {
        let (g, nu) = (gh(), unif(1.0));
        let t = 0.35;
        let (y, w) = ([-t, t], [0.5, 0.5]);
        let s = SMap::new(&y, &w, &nu, &g, 1.0, KernelConfig::default()).unwrap();
        let exact = normal::cdf(2f64.sqrt() * t) - 0.5;
        assert!((s.eval(t).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn doubling_the_target_doubles_the_slope() {
        let g = gh();
        let (y, w) = ([-0.3, 0.1, 0.9], [0.2, 0.5, 0.3]);
        let (n1, n2) = (unif(1.0), unif(2.0));
        let s1 = SMap::new(&y, &w, &n1, &g, 1.0, KernelConfig::default()).unwrap();
        let s2 = SMap::new(&y, &w, &n2, &g, 1.0, KernelConfig::default()).unwrap();
        for x in [-1.0, 0.0, 0.5] {
            assert!((s2.derivative(x).unwrap() - 2.0 * s1.derivative(x).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn t_kernel_for_uniform_target() {
        let (g, nu) = (gh(), unif(0.8));
        let (y, w) = ([-0.3, 0.5], [0.6, 0.4]);
        let s = SMap::new(&y, &w, &nu, &g, 1.0, KernelConfig::default()).unwrap();
        let k2 = HeatKernel::new(2.0).unwrap();
        for (x, yy) in [(0.0, 0.0), (0.5, -1.0), (-1.0, 2.0)] {
            assert!((s.t_kernel(x, yy) - 1.6 * k2.pdf(x - yy)).abs() < 1e-13);
        }
    }

    fn tn() -> AnalyticDistribution {
        AnalyticDistribution::trunc_normal(0.1, 1.2, -3.0, 3.2).unwrap()
    }

    #[test]
    fn t_row_integrates_to_derivative() {
        let (g, nu) = (gh(), tn());
        let y = [-1.1, -0.2, 0.3, 1.4];
        let w = [0.1, 0.4, 0.3, 0.2];
        let s = SMap::new(&y, &w, &nu, &g, 1.0, KernelConfig::default()).unwrap();
        for x in [-1.5, -0.1, 0.8] {
            let row = s.t_row(x, &y);
            let via_row: f64 = row.iter().zip(&w).map(|(t, w)| t * w).sum();
            assert!((via_row - s.derivative(x).unwrap()).abs() < 1e-8);
            for (r, yy) in row.iter().zip(&y) {
                assert!((r - s.t_kernel(x, *yy)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn variance_t_map_is_a_rescaled_unit_map() {
        let g = gh();
        let t = 0.36f64;
        let nu = tn();
        let (y, w) = ([-0.5, 0.2, 0.7], [0.3, 0.3, 0.4]);
        let direct = SMap::new(&y, &w, &nu, &g, t, KernelConfig::default()).unwrap();
        let h = t.sqrt();
        let nu1 = nu.affine(1.0 / h, 0.0);
        let y1: Vec<f64> = y.iter().map(|v| v / h).collect();
        let unit = SMap::new(&y1, &w, &nu1, &g, 1.0, KernelConfig::default()).unwrap();
        for x in [-0.8, 0.0, 0.4] {
            assert!((direct.eval(x).unwrap() - h * unit.eval(x / h).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_within_ellipticity_bounds() {
        let (g, nu) = (gh(), tn());
        let (eps, delta) = SMap::derivative_bounds(&nu, 1.0, 2.0, 3.0, 2000).unwrap();
        let y = [-2.0, -0.5, 0.0, 2.0];
        let w = [0.25; 4];
        let s = SMap::new(&y, &w, &nu, &g, 1.0, KernelConfig::default()).unwrap();
        for k in 0..=30 {
            let x = -3.0 + 0.2 * k as f64;
            let d = s.derivative(x).unwrap();
            assert!(eps <= d && d <= delta, "{x}: {eps} ≤ {d} ≤ {delta}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn invert_eval_round_trip(x in -3.0f64..3.0, a in -1.0f64..0.0, b in 0.0f64..1.0) {
            let (g, nu) = (gh(), tn());
            let (y, w) = ([a, b], [0.5, 0.5]);
            let s = SMap::new(&y, &w, &nu, &g, 1.0, KernelConfig::default()).unwrap();
            let target = s.eval(x).unwrap();
            let back = s.invert(target, None).unwrap();
            prop_assert!((back - x).abs() < 1e-9, "{} vs {}", back, x);
            prop_assert!(s.derivative(x).unwrap() > 0.0);
        }

        #[test]
        fn smoothing_preserves_order(shift in 0.0f64..1.0, x in -3.0f64..3.0) {
            // F ≤ G pointwise when G's atoms sit to the left of F's.
            let k = HeatKernel::new(0.7).unwrap();
            let ya = [-0.5, 0.4, 1.0];
            let yb: Vec<f64> = ya.iter().map(|y| y - shift).collect();
            let w = [0.2, 0.5, 0.3];
            prop_assert!(k.smooth_step(&ya, &w, x) <= k.smooth_step(&yb, &w, x) + 1e-15);
        }
    }
}
