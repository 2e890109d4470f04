use basscalib_core::bass_model::{calibrate_bass_lv, simulate, CalibrationConfig, SimulationConfig};
use basscalib_core::problems::normal_logistic_mixture;
use basscalib_core::semidiscrete::{NewtonOptions, SemidiscreteSystem};
use basscalib_core::{AnalyticDistribution, DiscreteMeasure, Measure, SolverConfig};
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn apply_g(c: &mut Criterion) {
    let mut g = c.benchmark_group("apply_g");
    for atoms in [10, 50, 200] {
        let p = normal_logistic_mixture(atoms).unwrap().build(SolverConfig::default()).unwrap();
        let q = p.initial_state();
        g.bench_with_input(BenchmarkId::from_parameter(atoms), &q, |b, q| b.iter(|| p.apply_g(black_box(q)).unwrap()));
    }
    g.finish();
}

fn s_map(c: &mut Criterion) {
    let p = normal_logistic_mixture(50).unwrap().build(SolverConfig::default()).unwrap();
    let q = p.initial_state();
    c.bench_function("s_map_invert", |b| {
        b.iter(|| p.with_s_map(&q, |s| s.invert(black_box(0.37), None).unwrap()).unwrap())
    });
}

fn newton(c: &mut Criterion) {
    let mu = DiscreteMeasure::new(vec![-0.6, -0.2, 0.2, 0.6], vec![0.2, 0.3, 0.3, 0.2]).unwrap();
    let nu = AnalyticDistribution::uniform(-1.5, 1.5).unwrap();
    let p = basscalib_core::FixedPointProblem::new(mu, nu, 1.0, SolverConfig::default()).unwrap();
    c.bench_function("newton_4_atoms", |b| {
        b.iter(|| SemidiscreteSystem::new(&p).solve_newton(None, NewtonOptions::default()).unwrap())
    });
}

fn paths(c: &mut Criterion) {
    let marginals: Vec<(f64, Measure)> = vec![
        (0.0, DiscreteMeasure::dirac(0.0).into()),
        (1.0, AnalyticDistribution::uniform(-1.0, 1.0).unwrap().into()),
    ];
    let model = calibrate_bass_lv(&marginals, &CalibrationConfig::default()).unwrap();
    let cfg = SimulationConfig { paths: 10_000, times: vec![0.5], seed: 3, table_nodes: 2048 };
    let mut g = c.benchmark_group("simulate");
    g.sample_size(20);
    g.bench_function("bass_10k", |b| b.iter(|| simulate(&model, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, apply_g, s_map, newton, paths);
criterion_main!(benches);
