//! Grid-factored vs all-pairs repulsive field, and the bare grid
//! convolution across sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sgtsne::exact::exact_repulsive;
use sgtsne::nuconv::ConvEngine;
use sgtsne::synth::random_points;
use sgtsne::{ConvKernel, GridConfig, GridWorkspace};

fn repulsive(c: &mut Criterion) {
    let mut group = c.benchmark_group("repulsive");
    group.sample_size(10);
    for &n in &[2_000usize, 10_000, 50_000] {
        let y = random_points(n, 2, 30.0, 7);
        let mut ws = GridWorkspace::new(GridConfig::default());
        let mut frep = vec![0.0; y.len()];
        group.bench_with_input(BenchmarkId::new("grid", n), &y, |b, y| {
            b.iter(|| ws.repulsive_term(y, 2, &mut frep).unwrap())
        });
        // quadratic; keep the exact side small
        if n <= 10_000 {
            group.bench_with_input(BenchmarkId::new("exact", n), &y, |b, y| {
                b.iter(|| exact_repulsive(y, 2).unwrap())
            });
        }
    }
    group.finish();
}

fn g2g(c: &mut Criterion) {
    let mut group = c.benchmark_group("g2g_apply");
    group.sample_size(20);
    let cases: [&[usize]; 3] = [&[4096], &[128, 128], &[48, 48, 48]];
    for dims in cases {
        let g: usize = dims.iter().product();
        let h = vec![0.5; dims.len()];
        let mut engine = ConvEngine::new();
        engine.prepare(dims, &h);
        let input: Vec<f64> = (0..g).map(|i| (i as f64).sin()).collect();
        let mut out = vec![0.0; g];
        let label = dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| engine.apply(&input, &mut out, ConvKernel::CauchyPow2))
        });
    }
    group.finish();
}

criterion_group!(benches, repulsive, g2g);
criterion_main!(benches);
