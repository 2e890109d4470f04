//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes
//! with the Fritsch–Butland harmonic mean at interior nodes).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::domain("interpolation needs at least two nodes"));
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("interpolation nodes must be strictly increasing"));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = y.windows(2).zip(&h).map(|(w, h)| (w[1] - w[0]) / h).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = s[0];
            d[1] = s[0];
        } else {
            for k in 1..n - 1 {
                if s[k - 1] * s[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / s[k - 1] + w2 / s[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], s[0], s[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// Value at `t`, or `None` outside the node range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return None;
        }
        let k = match self.x.partition_point(|v| *v <= t) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u).powi(2),
            u * (1.0 - u).powi(2),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        Some(h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1])
    }
}

fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d.signum() != s0.signum() || s0 == 0.0 {
        0.0
    } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_nodes_and_smooth_functions() {
        let x: Vec<f64> = (0..=200).map(|k| -3.0 + 6.0 * k as f64 / 200.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
        let p = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(p.eval(*a).unwrap(), *b);
        }
        for k in 0..1000 {
            let t = -2.99 + 5.98 * k as f64 / 1000.0;
            assert!((p.eval(t).unwrap() - t.tanh()).abs() < 1e-6);
        }
        assert!(p.eval(3.1).is_none());
    }

    proptest! {
        #[test]
        fn monotone_data_stays_monotone(steps in prop::collection::vec(0.0f64..1.0, 3..20)) {
            let x: Vec<f64> = (0..steps.len()).map(|k| k as f64).collect();
            let y: Vec<f64> = steps.iter().scan(0.0, |a, s| { *a += s * s; Some(*a) }).collect();
            let p = MonotoneCubic::new(x, y).unwrap();
            let (lo, hi) = p.domain();
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=500 {
                let v = p.eval(lo + (hi - lo) * k as f64 / 500.0).unwrap();
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
