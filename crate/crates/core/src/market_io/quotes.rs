//! Call quotes and the marginals they imply.
//!
//! Prices are undiscounted forward prices `C(K) = E[(X − K)^+]`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::projection::isotonic_regression;
use crate::error::{Error, Result};
use crate::measures::{AnalyticDistribution, DiscreteMeasure, Measure};

/// Quotes of one maturity, sorted by strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaturityQuotes {
    pub maturity: f64,
    pub strikes: Vec<f64>,
    pub prices: Vec<f64>,
    /// Mean level of the underlying, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuoteSurface {
    pub slices: Vec<MaturityQuotes>,
}

#[derive(Debug, Deserialize, Serialize)]
struct QuoteRow {
    maturity: f64,
    strike: f64,
    price: f64,
}

impl QuoteSurface {
    /// Reads `maturity,strike,price` rows.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["maturity", "strike", "price"] {
            return Err(Error::data(format!("quote header must be maturity,strike,price, got {headers:?}")));
        }
        let mut by_t: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
        for row in rd.deserialize() {
            let row: QuoteRow = row?;
            if !(row.maturity.is_finite() && row.strike.is_finite() && row.price.is_finite()) {
                return Err(Error::data("quotes must be finite"));
            }
            if row.maturity < 0.0 || row.price < 0.0 {
                return Err(Error::data("maturities and prices must be nonnegative"));
            }
            // Nonnegative floats order like their bit patterns.
            by_t.entry(row.maturity.to_bits()).or_default().push((row.strike, row.price));
        }
        let mut slices = Vec::new();
        for (bits, mut q) in by_t {
            q.sort_by(|a, b| a.0.total_cmp(&b.0));
            if q.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::data(format!("duplicate strike at maturity {}", f64::from_bits(bits))));
            }
            let (strikes, prices) = q.into_iter().unzip();
            slices.push(MaturityQuotes { maturity: f64::from_bits(bits), strikes, prices, forward: None });
        }
        Ok(Self { slices })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for s in &self.slices {
            for (k, c) in s.strikes.iter().zip(&s.prices) {
                wr.serialize(QuoteRow { maturity: s.maturity, strike: *k, price: *c })?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Exact call prices of the given laws on a strike grid.
    pub fn from_measures(slices: &[(f64, Measure)], strikes: &[f64]) -> Self {
        Self {
            slices: slices
                .iter()
                .map(|(t, m)| MaturityQuotes {
                    maturity: *t,
                    strikes: strikes.to_vec(),
                    prices: strikes.iter().map(|k| m.call(*k)).collect(),
                    forward: Some(m.mean()),
                })
                .collect(),
        }
    }
}

/// The law whose call function is the piecewise-linear interpolation of the
/// (repaired) quotes, with slope −1 left of the first strike and 0 right of
/// the last. Its atoms sit at the strikes, where the interpolant has kinks.
///
/// Quotes are repaired by isotonic regression of the slopes onto `[−1, 0]`;
/// a violation larger than `tol` is reported as arbitrage instead.
pub fn implied_marginal(q: &MaturityQuotes, tol: f64) -> Result<DiscreteMeasure> {
    let n = q.strikes.len();
    if n < 3 || q.prices.len() != n {
        return Err(Error::data(format!("maturity {} needs at least 3 strikes", q.maturity)));
    }
    let (k, c) = (&q.strikes, &q.prices);
    let dk: Vec<f64> = k.windows(2).map(|w| w[1] - w[0]).collect();
    if dk.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::data("strikes must be strictly increasing"));
    }
    let s: Vec<f64> = (0..n - 1).map(|i| (c[i + 1] - c[i]) / dk[i]).collect();
    let mut bad = Vec::new();
    for i in 0..n - 1 {
        if s[i] > tol || s[i] < -1.0 - tol {
            bad.push(k[i]);
        }
        if i > 0 && s[i] < s[i - 1] - tol {
            bad.push(k[i]);
        }
    }
    if !bad.is_empty() {
        bad.dedup();
        return Err(Error::data(format!(
            "maturity {}: quotes are not convex and decreasing at strikes {bad:?}",
            q.maturity
        )));
    }
    let s: Vec<f64> = isotonic_regression(&s, &dk).into_iter().map(|v| v.clamp(-1.0, 0.0)).collect();
    let mut atoms = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut left = -1.0;
    for i in 0..n {
        let right = if i + 1 < n { s[i] } else { 0.0 };
        let m = right - left;
        if m > 1e-14 {
            atoms.push(k[i]);
            weights.push(m);
        }
        left = right;
    }
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let d = DiscreteMeasure::new(atoms, weights)?;
    if let Some(f) = q.forward {
        let m = d.mean();
        if (m - f).abs() > tol.max(1e-9) * (1.0 + f.abs()) {
            return Err(Error::data(format!("maturity {}: implied mean {m} differs from forward {f}", q.maturity)));
        }
    }
    Ok(d)
}

/// Spreads each atom uniformly over `[x − r, x + r]`, giving a law with a
/// density that preserves the mean and the convex order between slices.
pub fn smooth_marginal(d: &DiscreteMeasure, half_width: f64) -> Result<AnalyticDistribution> {
    if !(half_width > 0.0) {
        return Err(Error::domain("smoothing width must be positive"));
    }
    let parts = d
        .atoms()
        .iter()
        .zip(d.weights())
        .map(|(x, w)| Ok((*w, AnalyticDistribution::uniform(x - half_width, x + half_width)?)))
        .collect::<Result<Vec<_>>>()?;
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().unwrap().1);
    }
    AnalyticDistribution::mixture(parts)
}
