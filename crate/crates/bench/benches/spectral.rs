use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use transfer_bench::rotated_log_operator;
use transfer_core::linalg::random_vector;
use transfer_core::spectral::top_eigenpair;
use transfer_core::{LinearOperator, PowerOptions, C64};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    group.sample_size(10);
    for w in [8.0, 16.0, 32.0] {
        group.bench_with_input(BenchmarkId::from_parameter(w), &w, |b, &w| {
            b.iter(|| rotated_log_operator(w, 1.0, C64::new(1.0, 0.0), 1e-10).unwrap())
        });
    }
    group.finish();
}

fn matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("matvec");
    for w in [8.0, 16.0, 32.0, 64.0] {
        let op = rotated_log_operator(w, 1.0, C64::new(1.0, 0.0), 1e-10).unwrap();
        let x = random_vector(op.dim(), 1);
        let mut y = vec![C64::new(0.0, 0.0); op.dim()];
        group.bench_with_input(BenchmarkId::from_parameter(w), &w, |b, _| {
            b.iter(|| op.apply(&x, &mut y))
        });
    }
    group.finish();
}

fn eigenpair(c: &mut Criterion) {
    let mut group = c.benchmark_group("top_eigenpair");
    group.sample_size(10);
    for w in [8.0, 16.0] {
        let op = rotated_log_operator(w, 2.0, C64::new(1.0, 0.5), 1e-10).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(w), &w, |b, _| {
            b.iter(|| top_eigenpair(&op, None, &PowerOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, matvec, eigenpair);
criterion_main!(benches);
