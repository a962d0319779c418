//! Parallel against sequential maps over the workloads the sweeps fan out.
//!
//! `par_map` runs on the rayon pool when the `parallel` feature is on (the
//! default) and degrades to a plain loop without it, so running the bench
//! with `--no-default-features` shows the fallback cost as well.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use std::f64::consts::PI;
use std::sync::Arc;
use turnpoint::airy::airy_ai;
use turnpoint::momentum::ZetaMap;
use turnpoint::parallel::{par_map, seq_map};
use turnpoint::parametrix::{kernel_d0, KernelContext};
use turnpoint::potential::Potential;
use turnpoint::series::{build_coefficient_set, residual_point, AsymptoticSolution, Precision};
use turnpoint::C64;

fn solution(order: usize) -> AsymptoticSolution {
    let map = Arc::new(ZetaMap::for_potential(&Potential::linear(), C64::new(0.1, 0.0), 0).unwrap());
    let set = build_coefficient_set(&map, order).unwrap();
    AsymptoticSolution::new(map, Arc::new(set), 0)
}

fn airy(c: &mut Criterion) {
    let pts: Vec<C64> = (0..2000).map(|k| C64::from_polar(20.0 * ((k % 97) as f64 + 0.5) / 97.0, 0.37 * k as f64)).collect();
    let mut g = c.benchmark_group("airy_batch");
    g.bench_function("parallel", |b| b.iter(|| par_map(black_box(&pts), |&z| airy_ai(z).value)));
    g.bench_function("sequential", |b| b.iter(|| seq_map(black_box(&pts), |&z| airy_ai(z).value)));
    g.finish();
}

fn residual(c: &mut Criterion) {
    let sol = solution(1);
    let mut g = c.benchmark_group("residual_grid");
    g.sample_size(10);
    for n in [8usize, 32] {
        let jobs: Vec<(C64, f64)> = (0..n).map(|k| (C64::from_polar(0.5, 2.0 * PI * k as f64 / n as f64), 0.01)).collect();
        g.bench_with_input(BenchmarkId::new("parallel", n), &jobs, |b, jobs| b.iter(|| par_map(jobs, |&(z, h)| residual_point(&sol, z, h).unwrap().delta_hat)));
        g.bench_with_input(BenchmarkId::new("sequential", n), &jobs, |b, jobs| b.iter(|| seq_map(jobs, |&(z, h)| residual_point(&sol, z, h).unwrap().delta_hat)));
    }
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let sol = solution(0);
    let h = 0.02;
    let ctx = KernelContext::new(&sol, h, Precision::Double).unwrap();
    let z = C64::new(0.2, -0.3);
    let src: Vec<C64> = (0..256).map(|k| C64::new(0.2, -0.5 + 0.42 * (k as f64 + 0.5) / 256.0)).collect();
    let mut g = c.benchmark_group("d0_kernel_row");
    g.bench_function("parallel", |b| b.iter(|| par_map(&src, |&s| kernel_d0(&ctx, z, s).map(|k| k.ln_abs()).unwrap_or(0.0))));
    g.bench_function("sequential", |b| b.iter(|| seq_map(&src, |&s| kernel_d0(&ctx, z, s).map(|k| k.ln_abs()).unwrap_or(0.0))));
    g.finish();
}

criterion_group!(benches, airy, residual, kernel);
criterion_main!(benches);
