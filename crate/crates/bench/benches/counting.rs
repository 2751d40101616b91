use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use vspfit_bench::random_tree;
use vspfit_core::counting::top_counts;
use vspfit_core::count_le;

fn count_le_scaling(c: &mut Criterion) {
    let mut group = c.benchmark_group("count_le");
    for n in [100, 1_000, 10_000] {
        let t = random_tree(n, 0.5, n as u64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| b.iter(|| count_le(black_box(t.tree()))));
    }
    group.finish();
}

fn top_counts_small(c: &mut Criterion) {
    let t = random_tree(30, 0.5, 7);
    c.bench_function("top_counts n=30", |b| b.iter(|| top_counts(black_box(t.tree()))));
}

criterion_group!(benches, count_le_scaling, top_counts_small);
criterion_main!(benches);
