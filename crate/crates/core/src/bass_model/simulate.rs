//! Path simulation of a calibrated model.
//!
//! Each path owns the RNG stream `(seed, path index)`, so output does not
//! depend on how paths are scheduled across threads. Within an interval
//! `M_t = f_{t−T_i}(B_t)`. At a maturity the next interval starts from
//! `B = Q_α(F_{μ_{i+1}}(M))`, the comonotone choice.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CalibratedBassModel, MapTable};
use crate::error::{Error, Result};

/// Recorded alongside every batch.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = path index";

const MAGIC: &[u8; 8] = b"BASSPTH1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub paths: usize,
    /// Output times; the maturities are always added.
    pub times: Vec<f64>,
    pub seed: u64,
    /// Nodes of each `f_t` table.
    pub table_nodes: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { paths: 100_000, times: Vec::new(), seed: 0, table_nodes: 2048 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBatch {
    pub seed: u64,
    pub paths: usize,
    pub times: Vec<f64>,
    /// Row-major `paths × times`.
    pub values: Vec<f64>,
    pub rng: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub time: f64,
    pub mean: f64,
    pub stdev: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

impl PathBatch {
    pub fn value(&self, path: usize, k: usize) -> f64 {
        self.values[path * self.times.len() + k]
    }

    /// All paths at the `k`-th time.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.paths).map(|p| self.value(p, k)).collect()
    }

    /// Index of time `t` on the grid.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        (0..self.times.len())
            .map(|k| {
                let mut c = self.column(k);
                let n = c.len() as f64;
                let mean = c.iter().sum::<f64>() / n;
                let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                c.sort_by(f64::total_cmp);
                SummaryRow {
                    time: self.times[k],
                    mean,
                    stdev: var.sqrt(),
                    q05: sorted_quantile(&c, 0.05),
                    q25: sorted_quantile(&c, 0.25),
                    q50: sorted_quantile(&c, 0.5),
                    q75: sorted_quantile(&c, 0.75),
                    q95: sorted_quantile(&c, 0.95),
                }
            })
            .collect()
    }

    /// Columns `time,mean,stdev,q05,q25,q50,q75,q95`.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for row in self.summary() {
            wr.serialize(row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Little-endian dump: magic `BASSPTH1`, `u64` path count, `u64` grid
    /// length, the grid times, then the values row by row (all `f64`).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.paths as u64).to_le_bytes())?;
        w.write_all(&(self.times.len() as u64).to_le_bytes())?;
        for v in self.times.iter().chain(&self.values) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads [`Self::write_binary`] output. Seed and RNG name are not stored.
    pub fn read_binary<R: Read>(mut r: R) -> Result<(Vec<f64>, usize, Vec<f64>)> {
        let mut head = [0u8; 24];
        r.read_exact(&mut head)?;
        if &head[..8] != MAGIC {
            return Err(Error::Parse { offset: 0, message: "not a path dump".into() });
        }
        let paths = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let grid = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let want = grid.checked_mul(paths + 1).and_then(|n| n.checked_mul(8));
        if want != Some(buf.len()) {
            return Err(Error::Parse { offset: 24, message: format!("expected {paths}×{grid} values") });
        }
        let all: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok((all[..grid].to_vec(), paths, all[grid..].to_vec()))
    }
}

/// Index `j` of the generalized inverse `min{j : w_1 + … + w_j ≥ v}`.
fn atom_index(weights: &[f64], v: f64) -> usize {
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= v {
            return j;
        }
    }
    weights.len() - 1
}

fn sorted_quantile(s: &[f64], p: f64) -> f64 {
    let h = (s.len() - 1) as f64 * p;
    let (i, f) = (h.floor() as usize, h - h.floor());
    if i + 1 < s.len() {
        s[i] + f * (s[i + 1] - s[i])
    } else {
        s[i]
    }
}

/// Simulates `config.paths` paths on the union of `config.times` and the
/// model's maturities.
pub fn simulate(model: &CalibratedBassModel, config: &SimulationConfig) -> Result<PathBatch> {
    if config.times.is_empty() {
        return Err(Error::domain("simulation needs a non-empty time grid"));
    }
    if config.paths == 0 {
        return Err(Error::domain("simulation needs at least one path"));
    }
    let (t0, t1) = (model.first_maturity(), model.last_maturity());
    if config.times.iter().any(|t| !(*t >= t0 && *t <= t1)) {
        return Err(Error::domain(format!("simulation times must lie in [{t0}, {t1}]")));
    }
    let mut times: Vec<f64> = config.times.iter().chain(&model.maturities).copied().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    // tables[i][c] lists (grid index, f table) for the times owned by interval i.
    let mut tables: Vec<Vec<Vec<(usize, MapTable)>>> = Vec::new();
    for (i, iv) in model.intervals.iter().enumerate() {
        let owned: Vec<usize> = (0..times.len())
            .filter(|&k| {
                let t = times[k];
                (t > iv.start || (i == 0 && t == iv.start)) && t <= iv.end
            })
            .collect();
        let mut per_comp = Vec::new();
        for comp in &iv.components {
            let mut v = Vec::with_capacity(owned.len());
            for &k in &owned {
                let s = (times[k] - iv.start).clamp(0.0, iv.length());
                v.push((k, comp.maps.tabulate(s, config.table_nodes)?));
            }
            per_comp.push(v);
        }
        tables.push(per_comp);
    }

    let g = times.len();
    let rows: Vec<Vec<f64>> = (0..config.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(p as u64);
            let mut row = vec![0.0; g];
            let mut u: f64 = rng.random();
            for (i, iv) in model.intervals.iter().enumerate() {
                let (c, v) = iv.locate(u);
                let comp = &iv.components[c];
                let j = atom_index(comp.maps.alpha().weights(), v);
                let mut b = comp.maps.alpha().atoms()[j];
                let mut prev = iv.start;
                let mut m = f64::NAN;
                for (k, tab) in &tables[i][c] {
                    let t = times[*k];
                    if t > prev {
                        let z: f64 = rng.sample(StandardNormal);
                        b += (t - prev).sqrt() * z;
                        prev = t;
                        m = tab.eval(&comp.maps, b);
                    } else {
                        // f_0(α_j) is the start atom.
                        m = comp.mu.atoms()[j];
                    }
                    row[*k] = m;
                }
                u = model.marginals[i + 1].cdf(m);
            }
            row
        })
        .collect();
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("simulation produced non-finite values"));
    }
    Ok(PathBatch { seed: config.seed, paths: config.paths, times, values, rng: RNG_NAME.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bass_model::{calibrate_bass_lv, CalibrationConfig};
    use crate::measures::{ks_distance, AnalyticDistribution, DiscreteMeasure, Measure};

    fn bass_model() -> CalibratedBassModel {
        let marg: Vec<(f64, Measure)> = vec![
            (0.0, DiscreteMeasure::dirac(0.0).into()),
            (1.0, AnalyticDistribution::uniform(-1.0, 1.0).unwrap().into()),
        ];
        calibrate_bass_lv(&marg, &CalibrationConfig::default()).unwrap()
    }

    #[test]
    fn bass_case_terminal_law_and_determinism() {
        let m = bass_model();
        let cfg = SimulationConfig { paths: 20_000, times: vec![0.5], seed: 7, ..Default::default() };
        let a = simulate(&m, &cfg).unwrap();
        assert_eq!(a.times, vec![0.0, 0.5, 1.0]);
        assert!(a.column(0).iter().all(|v| v.abs() < 1e-12));
        let ks = ks_distance(&a.column(2), &m.marginals[1]);
        assert!(ks < 1.95 / (20_000f64).sqrt(), "{ks}");
        let b = simulate(&m, &cfg).unwrap();
        assert_eq!(a, b);
        let mut s1 = Vec::new();
        a.write_summary_csv(&mut s1).unwrap();
        let text = String::from_utf8(s1).unwrap();
        assert!(text.starts_with("time,mean,stdev,q05,q25,q50,q75,q95\n"));
    }

    #[test]
    fn binary_dump_round_trip() {
        let m = bass_model();
        let cfg = SimulationConfig { paths: 10, times: vec![0.25], seed: 1, table_nodes: 64 };
        let a = simulate(&m, &cfg).unwrap();
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 3 * 11);
        let (times, paths, values) = PathBatch::read_binary(&buf[..]).unwrap();
        assert_eq!((times, paths, values), (a.times.clone(), a.paths, a.values.clone()));
        buf[0] = b'X';
        assert!(matches!(PathBatch::read_binary(&buf[..]), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn refuses_bad_grids() {
        let m = bass_model();
        let cfg = SimulationConfig { paths: 10, ..Default::default() };
        assert!(matches!(simulate(&m, &cfg), Err(Error::Domain(_))));
        let cfg = SimulationConfig { paths: 10, times: vec![1.5], ..Default::default() };
        assert!(matches!(simulate(&m, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn two_interval_chaining_hits_both_marginals() {
        let marg: Vec<(f64, Measure)> = vec![
            (0.0, DiscreteMeasure::dirac(0.0).into()),
            (0.5, AnalyticDistribution::uniform(-0.6, 0.6).unwrap().into()),
            (1.0, AnalyticDistribution::uniform(-1.0, 1.0).unwrap().into()),
        ];
        let model = calibrate_bass_lv(&marg, &CalibrationConfig { atoms: 40, ..Default::default() }).unwrap();
        let n = 20_000;
        let b = simulate(&model, &SimulationConfig { paths: n, times: vec![0.25, 0.75], seed: 3, ..Default::default() })
            .unwrap();
        for (t, m) in &marg[1..] {
            let k = b.time_index(*t).unwrap();
            assert!(ks_distance(&b.column(k), m) < 1.95 / (n as f64).sqrt());
        }
    }
}
