use std::path::Path;

use basscalib_core::bass_model::{calibrate_bass_lv, martingale_diagnostics, simulate, SimulationConfig};
use basscalib_core::fixedpoint::hull_measure;
use basscalib_core::market_io::{canonical_json, write_atomic, CalibrationArtifact};
use basscalib_core::problems::truncated_normal_ramp;
use basscalib_core::{Error, FixedPointProblem, IterationTrace, Result, StepQuantile};
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Process exit status of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    DiagnosticsFailed,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_trace(path: &Path, trace: &IterationTrace) -> Result<()> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    write_atomic(path, &buf)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn nan_to_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn calibrate(cfg: &RunConfig) -> Result<Status> {
    std::fs::create_dir_all(&cfg.out)?;
    let marginals = cfg.resolve_marginals()?;
    let model = match calibrate_bass_lv(&marginals, &cfg.calibration) {
        Ok(m) => m,
        Err(Error::NonConvergence { iterations, residual, trace }) => {
            write_trace(&cfg.out.join("trace_failed.csv"), &trace)?;
            return Err(Error::NonConvergence { iterations, residual, trace });
        }
        Err(e) => return Err(e),
    };

    let mut intervals = Vec::new();
    for (i, iv) in model.intervals.iter().enumerate() {
        let mut comps = Vec::new();
        for (c, comp) in iv.components.iter().enumerate() {
            let alpha = comp.maps.alpha();
            let p = FixedPointProblem::new(comp.mu.clone(), comp.maps.nu().clone(), iv.length(), cfg.calibration.solver)?;
            let state = StepQuantile::from_measure(alpha);
            let bound = p.derivative_density(&state).and_then(|d| d.contraction_bound());
            let mut entry = json!({
                "lo": comp.lo,
                "hi": comp.hi,
                "mass": comp.mass,
                "atoms": alpha.atoms(),
                "hull_measure": hull_measure(&state),
                "contraction_bound": bound.map(nan_to_null).unwrap_or(Value::Null),
            });
            if let Some(tr) = &comp.trace {
                write_trace(&cfg.out.join(format!("trace_{i}_{c}.csv")), tr)?;
                entry["iterations"] = json!(tr.len());
                entry["final_residual"] = nan_to_null(tr.final_residual());
                entry["observed_rate"] = tr.observed_rate(5).map(nan_to_null).unwrap_or(Value::Null);
            }
            if let Some(n) = &comp.newton {
                entry["iterations"] = json!(n.iterations);
                entry["final_residual"] = json!(n.residual_norm);
            }
            comps.push(entry);
        }
        intervals.push(json!({ "start": iv.start, "end": iv.end, "components": comps }));
    }
    let summary = json!({
        "name": cfg.name,
        "method": cfg.calibration.method,
        "maturities": model.maturities,
        "intervals": intervals,
    });

    let artifact = CalibrationArtifact::new(model, cfg.calibration)?;
    artifact.save(&cfg.out.join("artifact.json"))?;
    write_text(&cfg.out.join("summary.json"), &canonical_json(&summary)?)?;
    Ok(Status::Ok)
}

pub fn sweep(cfg: &RunConfig) -> Result<Status> {
    let spec = cfg.sweep.as_ref().ok_or_else(|| Error::Domain("config has no sweep section".into()))?;
    std::fs::create_dir_all(&cfg.out)?;
    let dropped = spec.sigmas.iter().filter(|s| **s <= 1.0).count();
    if dropped > 0 {
        log::info!("dropping {dropped} degenerate ramp point(s) with σ ≤ 1");
    }
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["sigma", "iterations", "hull_measure", "final_residual", "status"])?;
    let sigmas = spec.sigmas.iter().filter(|s| **s > 1.0);
    for (sigma, point) in sigmas.zip(truncated_normal_ramp(&spec.sigmas)?) {
        let run = point.build(cfg.calibration.solver).and_then(|p| p.iterate(&p.initial_state()));
        let row = match run {
            Ok((q, tr)) => [
                format!("{sigma:?}"),
                tr.len().to_string(),
                format!("{:?}", hull_measure(&q)),
                format!("{:?}", tr.final_residual()),
                "ok".to_string(),
            ],
            Err(e) => {
                log::warn!("σ = {sigma}: {e}");
                let iters = match &e {
                    Error::NonConvergence { iterations, .. } => iterations.to_string(),
                    _ => String::new(),
                };
                [format!("{sigma:?}"), iters, String::new(), String::new(), e.to_string()]
            }
        };
        wr.write_record(&row)?;
    }
    let buf = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&cfg.out.join("sweep.csv"), &buf)?;
    Ok(Status::Ok)
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<Status> {
    let artifact = CalibrationArtifact::load(&cfg.artifact_path())?;
    std::fs::create_dir_all(&cfg.out)?;
    let model = &artifact.model;
    let sim = SimulationConfig {
        paths: cfg.simulation.paths,
        times: cfg.simulation.times.clone(),
        seed: cfg.seed,
        table_nodes: cfg.simulation.table_nodes,
    };
    let batch = simulate(model, &sim)?;
    let mut buf = Vec::new();
    batch.write_summary_csv(&mut buf)?;
    write_atomic(&cfg.out.join("paths_summary.csv"), &buf)?;
    if cfg.simulation.write_paths {
        let mut buf = Vec::new();
        batch.write_binary(&mut buf)?;
        write_atomic(&cfg.out.join("paths.bin"), &buf)?;
    }
    let marginals: Vec<_> = model.maturities.iter().copied().zip(model.marginals.iter().cloned()).collect();
    let report = martingale_diagnostics(&batch, &marginals, cfg.diagnostics)?;
    let doc = json!({
        "seed": batch.seed,
        "rng": batch.rng,
        "passed": report.passed(),
        "report": report,
    });
    write_text(&cfg.out.join("diagnostics.json"), &canonical_json(&doc)?)?;
    if report.passed() {
        Ok(Status::Ok)
    } else {
        log::error!(
            "diagnostics failed: KS {:?} vs threshold {:.4}, max decile gap {:.2} SE",
            report.ks,
            report.ks_threshold,
            report.max_gap_ratio
        );
        Ok(Status::DiagnosticsFailed)
    }
}

pub fn verify(path: &Path) -> Result<Status> {
    let a = CalibrationArtifact::load(path)?;
    println!(
        "{}: ok ({} interval(s), digest {})",
        path.display(),
        a.model.intervals.len(),
        &a.inputs_digest[..16]
    );
    Ok(Status::Ok)
}
