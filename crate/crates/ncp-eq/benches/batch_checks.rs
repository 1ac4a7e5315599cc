//! Compares the rayon-parallel batch property suites against their
//! sequential twins. Run with `cargo bench -p ncp-eq`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ncp_eq::reform::PhiFunction;
use ncp_eq::verify::{necessity_suite, necessity_suite_seq};

fn bench_necessity(c: &mut Criterion) {
    let mut group = c.benchmark_group("necessity_suite");
    for count in [50usize, 200] {
        group.bench_with_input(BenchmarkId::new("parallel", count), &count, |b, &count| {
            b.iter(|| necessity_suite(PhiFunction::Cube, &[1, 5], count, 7))
        });
        group.bench_with_input(
            BenchmarkId::new("sequential", count),
            &count,
            |b, &count| b.iter(|| necessity_suite_seq(PhiFunction::Cube, &[1, 5], count, 7)),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_necessity);
criterion_main!(benches);
