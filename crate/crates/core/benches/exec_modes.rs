use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use kirchhoff_core::continuation::{trace_branch, transform_branch, BranchContext};
use kirchhoff_core::elliptic::principal_eigenpair;
use kirchhoff_core::kirchhoff::theorem_c_h_scan;
use kirchhoff_core::pa2::{multi_start, random_positive_guesses, NewtonOptions};
use kirchhoff_core::{
    ChangeOfVariables, ContinuationSettings, ExecMode, GFunction, Mesh1D, ProblemParams, ToleranceSettings,
};

const MODES: [ExecMode; 2] = [ExecMode::Sequential, ExecMode::Parallel];

fn multi_start_bench(c: &mut Criterion) {
    let mesh = Mesh1D::new(255).unwrap();
    let eig = principal_eigenpair(&mesh, 1e-12).unwrap();
    let params = ProblemParams::new(2.0 * eig.lambda1, -1.0, 2.0, 2.0);
    let cv = ChangeOfVariables::new(1.0, 2.0).unwrap();
    let guesses = random_positive_guesses(&mesh, 32, 7, 1.0);
    let opts = NewtonOptions::default();
    let mut group = c.benchmark_group("multi_start");
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| black_box(multi_start(&mesh, &cv, &params, &guesses, &opts, mode)))
        });
    }
    group.finish();
}

fn c_sweep_bench(c: &mut Criterion) {
    let mesh = Mesh1D::new(511).unwrap();
    let eig = principal_eigenpair(&mesh, 1e-12).unwrap();
    let params = ProblemParams::new(5.0, eig.lambda1, 1.5, 1.5);
    let g = GFunction::Decaying { alpha: 1.0 };
    let cs: Vec<f64> = (1..=256).map(|k| 0.05 * k as f64).collect();
    let mut group = c.benchmark_group("c_sweep");
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| black_box(theorem_c_h_scan(&mesh, &eig, &params, &g, &cs, mode).unwrap()))
        });
    }
    group.finish();
}

fn transform_bench(c: &mut Criterion) {
    let mesh = Mesh1D::new(511).unwrap();
    let eig = principal_eigenpair(&mesh, 1e-12).unwrap();
    let params = ProblemParams::new(20.0, 0.0, 2.0, 2.0);
    let tol = ToleranceSettings::default();
    let ctx = BranchContext::new(&mesh, &params, &eig, &tol);
    let settings = ContinuationSettings { max_steps: 200, ..ContinuationSettings::default() };
    let branch = trace_branch(&ctx, &settings, (0.01, 10.0)).unwrap();
    let mut group = c.benchmark_group("transform_branch");
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| black_box(transform_branch(&mesh, &params, &tol, &branch, mode).unwrap()))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = multi_start_bench, c_sweep_bench, transform_bench
}
criterion_main!(benches);
