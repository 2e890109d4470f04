//! Finitely supported probability measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance under which two atoms are considered the same point.
pub const MERGE_RTOL: f64 = 1e-12;

/// Tolerance on the total mass.
pub const MASS_TOL: f64 = 1e-12;

/// `Σ w_j δ_{x_j}` with strictly increasing atoms and positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscrete", into = "RawDiscrete")]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDiscrete {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawDiscrete> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawDiscrete) -> Result<Self> {
        DiscreteMeasure::new(raw.atoms, raw.weights)
    }
}

impl From<DiscreteMeasure> for RawDiscrete {
    fn from(m: DiscreteMeasure) -> Self {
        RawDiscrete { atoms: m.atoms, weights: m.weights }
    }
}

impl DiscreteMeasure {
    /// Sorts, merges near-coincident atoms and validates the weights.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::domain(format!(
                "discrete measure needs matching non-empty atoms/weights ({} vs {})",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("atoms must be finite"));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::domain("weights must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL * atoms.len().max(1) as f64 {
            return Err(Error::domain(format!("weights sum to {total}, not 1")));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match merged.last_mut() {
                Some((y, v)) if (x - *y).abs() <= MERGE_RTOL * x.abs().max(y.abs()).max(1.0) => {
                    // Keep the mass-weighted position of the merged atoms.
                    *y = (*y * *v + x * w) / (*v + w);
                    *v += w;
                }
                _ => merged.push((x, w)),
            }
        }
        let (atoms, weights) = merged.into_iter().unzip();
        Ok(Self { atoms, weights })
    }

    /// Equal weights `1/n` on the given atoms.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::domain("uniform discrete measure needs at least one atom"));
        }
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    pub fn dirac(at: f64) -> Self {
        Self { atoms: vec![at], weights: vec![1.0] }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Left cell boundaries `p_j = Σ_{k<j} w_k`, with a trailing 1.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        p.push(0.0);
        for w in &self.weights {
            acc += w;
            p.push(acc);
        }
        *p.last_mut().unwrap() = 1.0;
        p
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms.iter().zip(&self.weights).map(|(x, w)| w * (x - m).powi(2)).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a <= x);
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }

    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a < x);
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }

    /// `inf{x : F(x) ≥ u}`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (x, w) in self.atoms.iter().zip(&self.weights) {
            acc += w;
            if acc >= u - 1e-15 {
                return *x;
            }
        }
        *self.atoms.last().unwrap()
    }

    /// `E[(x − X)^+]`.
    pub fn put(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .take_while(|(a, _)| **a < x)
            .map(|(a, w)| w * (x - a))
            .sum()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.atoms[0], *self.atoms.last().unwrap())
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self { atoms: self.atoms.iter().map(|x| x + c).collect(), weights: self.weights.clone() }
    }

    /// Law of `scale·X + shift`, `scale > 0`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        assert!(scale > 0.0, "affine scale must be positive");
        Self {
            atoms: self.atoms.iter().map(|x| scale * x + shift).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Convex combination `λ·self + (1−λ)·other`.
    pub fn mix(&self, lambda: f64, other: &Self) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let mut weights: Vec<f64> = self.weights.iter().map(|w| lambda * w).collect();
        weights.extend(other.weights.iter().map(|w| (1.0 - lambda) * w));
        Self::new(atoms, weights)
    }

    /// Writes `atom,weight` rows with a header line.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["atom", "weight"])?;
        for (x, p) in self.atoms.iter().zip(&self.weights) {
            wr.write_record([x.to_string(), p.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "atom" || &headers[1] != "weight" {
            return Err(Error::data(format!("expected header `atom,weight`, got {headers:?}")));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::data(format!("row {}: {e}", line + 2)))
            };
            atoms.push(parse(&rec[0])?);
            weights.push(parse(&rec[1])?);
        }
        Self::new(atoms, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalization_sorts_and_merges() {
        let m = DiscreteMeasure::new(vec![1.0, -1.0, 1.0 + 1e-14], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.atoms()[0], -1.0);
        assert!((m.weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(DiscreteMeasure::new(vec![], vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn cdf_and_quantile() {
        let m = DiscreteMeasure::new(vec![0.0, 1.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(m.cdf(-0.1), 0.0);
        assert!((m.cdf(1.0) - 0.5).abs() < 1e-15);
        assert!((m.cdf_left(1.0) - 0.2).abs() < 1e-15);
        assert_eq!(m.quantile(0.2), 0.0);
        assert_eq!(m.quantile(0.2001), 1.0);
        assert_eq!(m.quantile(1.0), 3.0);
        assert!((m.put(2.0) - (0.2 * 2.0 + 0.3 * 1.0)).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let m = DiscreteMeasure::new(vec![-0.5, 0.25, 2.0], vec![0.1, 0.6, 0.3]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("atom,weight\n"));
        let back = DiscreteMeasure::read_csv(buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn json_validates() {
        let bad = r#"{"atoms":[0.0,1.0],"weights":[0.5,0.2]}"#;
        assert!(serde_json::from_str::<DiscreteMeasure>(bad).is_err());
    }
}
