//! Gauss–Hermite and Gauss–Legendre rules.
//!
//! Nodes come from Newton iteration on the orthonormal three-term recurrences,
//! which stays accurate well past the orders used here (64 Hermite nodes).

use crate::error::{Error, Result};

/// A rule for `∫ h(z) φ(z) dz` against the standard normal density.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::domain("Gauss-Hermite order must be positive"));
        }
        let (t, w) = hermite_physicists(order)?;
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let nodes = t.iter().map(|t| std::f64::consts::SQRT_2 * t).collect();
        let total: f64 = w.iter().sum::<f64>() / sqrt_pi;
        // Renormalise so constants integrate exactly.
        let weights = w.iter().map(|w| w / sqrt_pi / total).collect();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes for the standard normal weight.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[h(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut h: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * h(z))
            .sum()
    }

    /// `E[h(σZ)]`, i.e. integration against the centred Gaussian of variance `var`.
    pub fn expect_var<F: FnMut(f64) -> f64>(&self, var: f64, mut h: F) -> f64 {
        let s = var.sqrt();
        self.expect(|z| h(s * z))
    }
}

/// Physicists' rule for weight `exp(-t²)`.
fn hermite_physicists(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    const EPS: f64 = 3e-15;
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= EPS * (1.0 + z.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::numeric(format!("Gauss-Hermite node {i} of {n} did not converge")));
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // Ascending order.
    x.reverse();
    w.reverse();
    Ok((x, w))
}

/// Gauss–Legendre rule on [-1, 1]; map with [`GaussLegendre::integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("Gauss-Legendre order must be positive"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp;
            loop {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Ok(Self { nodes, weights })
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum::<f64>()
    }

    /// Composite rule over `pieces` equal sub-intervals.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        pieces: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / pieces as f64;
        (0..pieces)
            .map(|k| {
                let lo = a + k as f64 * h;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(64).unwrap();
        assert!((gh.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(gh.expect(|z| z).abs() < 1e-14);
        assert!((gh.expect(|z| z * z) - 1.0).abs() < 1e-13);
        assert!((gh.expect(|z| z.powi(4)) - 3.0).abs() < 1e-12);
        assert!((gh.expect(|z| z.powi(10)) - 945.0).abs() < 1e-9);
        // E[cos Z] = e^{-1/2}
        assert!((gh.expect(f64::cos) - (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn hermite_small_orders() {
        let gh = GaussHermite::new(1).unwrap();
        assert_eq!(gh.nodes(), &[0.0]);
        let gh = GaussHermite::new(2).unwrap();
        assert!((gh.nodes()[1] - 1.0).abs() < 1e-14);
        assert!(GaussHermite::new(0).is_err());
    }

    #[test]
    fn legendre_polynomials_exact() {
        let gl = GaussLegendre::new(16).unwrap();
        // Degree 31 is integrated exactly.
        let v = gl.integrate(-1.0, 2.0, |x| x.powi(31));
        let exact = (2f64.powi(32) - 1.0) / 32.0;
        assert!(((v - exact) / exact).abs() < 1e-13);
        assert!((gl.integrate(0.0, std::f64::consts::PI, f64::sin) - 2.0).abs() < 1e-14);
    }
}
