//! Calibration artifacts: canonical JSON, atomic writes, reload checks.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::byte_offset;
use crate::bass_model::{build_maps, CalibratedBassModel, CalibrationConfig};
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointProblem;
use crate::measures::Measure;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub format_version: u32,
    pub crate_version: String,
    /// Hex SHA-256 of the canonical JSON of the maturities and marginals.
    pub inputs_digest: String,
    pub config: CalibrationConfig,
    pub model: CalibratedBassModel,
}

#[derive(Serialize)]
struct Inputs<'a> {
    maturities: &'a [f64],
    marginals: &'a [Measure],
}

pub fn inputs_digest(maturities: &[f64], marginals: &[Measure]) -> Result<String> {
    let bytes = canonical_json(&Inputs { maturities, marginals })?;
    Ok(Sha256::digest(bytes.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

/// Pretty JSON with object keys sorted at every level.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Map is a BTreeMap without the preserve_order feature.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

impl CalibrationArtifact {
    pub fn new(model: CalibratedBassModel, config: CalibrationConfig) -> Result<Self> {
        Ok(Self {
            format_version: FORMAT_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs_digest: inputs_digest(&model.maturities, &model.marginals)?,
            config,
            model,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            offset: byte_offset(text, e.line(), e.column()),
            message: e.to_string(),
        })?;
        if a.format_version != FORMAT_VERSION {
            return Err(Error::Parse {
                offset: 0,
                message: format!("unsupported artifact format {}", a.format_version),
            });
        }
        if a.crate_version != env!("CARGO_PKG_VERSION") {
            log::warn!("artifact written by version {}, reading with {}", a.crate_version, env!("CARGO_PKG_VERSION"));
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    /// Reads and re-verifies an artifact.
    pub fn load(path: &Path) -> Result<Self> {
        let a = Self::from_json(&std::fs::read_to_string(path)?)?;
        a.verify()?;
        Ok(a)
    }

    /// Checks the inputs digest, that every block solves its own fixed-point
    /// problem, and that the blocks are built on the stored marginals.
    pub fn verify(&self) -> Result<()> {
        let m = &self.model;
        let digest = inputs_digest(&m.maturities, &m.marginals)?;
        if digest != self.inputs_digest {
            return Err(Error::Verification(format!(
                "inputs digest {digest} does not match stored {}",
                self.inputs_digest
            )));
        }
        if m.maturities.len() != m.marginals.len() || m.intervals.len() + 1 != m.maturities.len() {
            return Err(Error::Verification("interval count does not match maturities".into()));
        }
        for (i, iv) in m.intervals.iter().enumerate() {
            if iv.start != m.maturities[i] || iv.end != m.maturities[i + 1] {
                return Err(Error::Verification(format!("interval {i} has wrong end points")));
            }
            if let Measure::Discrete(d) = &m.marginals[i] {
                if d != &iv.mu {
                    return Err(Error::Verification(format!("interval {i}: start law differs from marginal")));
                }
            }
            let nu = m.marginals[i + 1]
                .as_analytic()
                .ok_or_else(|| Error::Verification(format!("marginal {} is not closed-form", i + 1)))?;
            let mass: f64 = iv.components.iter().map(|c| c.mass).sum();
            if iv.components.is_empty() || (mass - 1.0).abs() > 1e-9 {
                return Err(Error::Verification(format!("interval {i}: block masses sum to {mass}")));
            }
            for (k, c) in iv.components.iter().enumerate() {
                let expect = if iv.components.len() == 1 { nu.clone() } else { nu.restrict(c.lo, c.hi)? };
                if c.maps.nu() != &expect {
                    return Err(Error::Verification(format!("interval {i} block {k}: terminal law differs")));
                }
                let p = FixedPointProblem::new(c.mu.clone(), expect, iv.length(), self.config.solver)
                    .map_err(|e| Error::Verification(format!("interval {i} block {k}: {e}")))?;
                if c.maps.horizon() != iv.length() {
                    return Err(Error::Verification(format!("interval {i} block {k}: wrong horizon")));
                }
                let centre = c.maps.alpha().mean();
                if centre.abs() > 1e-9 {
                    return Err(Error::Verification(format!("interval {i} block {k}: alpha has mean {centre:e}")));
                }
                build_maps(&p, c.maps.alpha())
                    .map_err(|e| Error::Verification(format!("interval {i} block {k}: {e}")))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bass_model::calibrate_bass_lv;
    use crate::measures::{AnalyticDistribution, DiscreteMeasure};

    fn artifact() -> CalibrationArtifact {
        let marg: Vec<(f64, Measure)> = vec![
            (0.0, DiscreteMeasure::new(vec![-0.3, 0.1, 0.2], vec![0.25, 0.25, 0.5]).unwrap().into()),
            (1.0, AnalyticDistribution::uniform(-1.0, 1.1).unwrap().into()),
        ];
        let cfg = CalibrationConfig::default();
        CalibrationArtifact::new(calibrate_bass_lv(&marg, &cfg).unwrap(), cfg).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        let a = artifact();
        a.save(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let b = CalibrationArtifact::load(&path).unwrap();
        b.save(&path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.find("\"config\"").unwrap() < text.find("\"crate_version\"").unwrap());
    }

    #[test]
    fn tampering_is_detected() {
        let a = artifact();
        let mut v = serde_json::to_value(&a).unwrap();
        let atoms = &mut v["model"]["intervals"][0]["components"][0]["maps"]["alpha"]["atoms"];
        atoms[0] = serde_json::json!(atoms[0].as_f64().unwrap() - 0.05);
        let t: CalibrationArtifact = serde_json::from_value(v).unwrap();
        assert!(matches!(t.verify(), Err(Error::Verification(_))));

        let mut v = serde_json::to_value(&a).unwrap();
        let atoms = &mut v["model"]["intervals"][0]["components"][0]["maps"]["alpha"]["atoms"];
        for x in atoms.as_array_mut().unwrap() {
            *x = serde_json::json!(x.as_f64().unwrap() + 0.05);
        }
        let t: CalibrationArtifact = serde_json::from_value(v).unwrap();
        assert!(matches!(t.verify(), Err(Error::Verification(m)) if m.contains("mean")));

        let mut t = a.clone();
        t.model.maturities[1] = 1.5;
        assert!(matches!(t.verify(), Err(Error::Verification(m)) if m.contains("digest")));
    }

    #[test]
    fn corrupt_file_reports_offset() {
        let text = artifact().to_json().unwrap();
        let cut = &text[..text.len() / 2];
        match CalibrationArtifact::from_json(cut) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0 && offset <= cut.len()),
            other => panic!("{other:?}"),
        }
        let bad = "{\n  \"format_version\": x\n}";
        match CalibrationArtifact::from_json(bad) {
            Err(Error::Parse { offset, .. }) => assert_eq!(&bad[offset..offset + 1], "x"),
            other => panic!("{other:?}"),
        }
    }
}
