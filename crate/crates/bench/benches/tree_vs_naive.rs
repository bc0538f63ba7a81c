// SPDX-License-Identifier: Apache-2.0

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use wolff_trace::{best_constant, AscentConfig};
use wolff_trace_bench::{certify_instance, fixture, naive_masses, sweep, tree_masses, CELLS};

fn apply_t(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_t");
    group.sample_size(10);
    for (depth, atoms) in CELLS {
        let fx = fixture(depth, atoms);
        let w = fx.kernel.window();
        let label = format!("d{depth}_a{atoms}");
        group.bench_with_input(BenchmarkId::new("naive", &label), &fx, |b, fx| {
            b.iter(|| sweep(&fx.kernel, &fx.sigma, &naive_masses(w, &fx.sigma, black_box(&fx.f))))
        });
        group.bench_with_input(BenchmarkId::new("tree", &label), &fx, |b, fx| {
            b.iter(|| sweep(&fx.kernel, &fx.sigma, &tree_masses(w, &fx.sigma, black_box(&fx.f))))
        });
    }
    group.finish();
}

fn certify(c: &mut Criterion) {
    let inst = certify_instance();
    let model = inst.model().unwrap();
    let cfg = AscentConfig::default();
    c.bench_function("best_constant_32_restarts", |b| {
        b.iter(|| best_constant(&model, inst.mu(), inst.exponents(), black_box(&cfg)).unwrap())
    });
}

criterion_group!(benches, apply_t, certify);
criterion_main!(benches);
