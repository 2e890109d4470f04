//! The JSON run configuration.

use std::path::{Path, PathBuf};

use basscalib_core::bass_model::{CalibrationConfig, DiagnosticThresholds};
use basscalib_core::market_io::{implied_marginal, smooth_marginal, QuoteSurface};
use basscalib_core::measures::DiscreteMeasure;
use basscalib_core::{Error, Measure, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    /// Marginal laws by maturity. Either this or `quotes` must be given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marginals: Vec<MarginalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quotes: Option<QuoteInput>,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub diagnostics: DiagnosticThresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Artifact read by `simulate` and `verify`; `<out>/artifact.json` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<PathBuf>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalSpec {
    pub maturity: f64,
    pub law: Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuoteInput {
    /// CSV with header `maturity,strike,price`, relative to the config file.
    pub path: PathBuf,
    /// Largest call-price violation repaired silently.
    #[serde(default = "default_repair_tol")]
    pub repair_tol: f64,
    /// Half-width of the uniform spread put on every implied atom.
    pub smoothing: f64,
    /// Spot level, added as a point mass at time 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot: Option<f64>,
}

fn default_repair_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub paths: usize,
    /// Extra grid times; the maturities are always included.
    pub times: Vec<f64>,
    pub table_nodes: usize,
    /// Also write every path to `paths.bin`.
    pub write_paths: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { paths: 100_000, times: Vec::new(), table_nodes: 2048, write_paths: false }
    }
}

/// A ramp of truncated-normal pairs, `ν` standard deviations in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub sigmas: Vec<f64>,
}

impl RunConfig {
    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            offset: basscalib_core::market_io::byte_offset(&text, e.line(), e.column()),
            message: format!("{}: {e}", path.display()),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(q) = &mut cfg.quotes {
            if q.path.is_relative() {
                q.path = base.join(&q.path);
            }
        }
        if let Some(a) = &mut cfg.artifact {
            if a.is_relative() {
                *a = base.join(&*a);
            }
        }
        Ok(cfg)
    }

    pub fn artifact_path(&self) -> PathBuf {
        self.artifact.clone().unwrap_or_else(|| self.out.join("artifact.json"))
    }

    /// The `(maturity, law)` list to calibrate.
    pub fn resolve_marginals(&self) -> Result<Vec<(f64, Measure)>> {
        match (&self.quotes, self.marginals.is_empty()) {
            (Some(_), false) => Err(Error::Domain("give either marginals or quotes, not both".into())),
            (None, true) => Err(Error::Domain("config has neither marginals nor quotes".into())),
            (None, false) => Ok(self.marginals.iter().map(|m| (m.maturity, m.law.clone())).collect()),
            (Some(q), true) => {
                let file = std::fs::File::open(&q.path)?;
                let surface = QuoteSurface::read_csv(file)?;
                let mut out = Vec::new();
                if let Some(s) = q.spot {
                    out.push((0.0, DiscreteMeasure::dirac(s).into()));
                }
                for slice in &surface.slices {
                    let d = implied_marginal(slice, q.repair_tol)?;
                    out.push((slice.maturity, smooth_marginal(&d, q.smoothing)?.into()));
                }
                Ok(out)
            }
        }
    }
}
