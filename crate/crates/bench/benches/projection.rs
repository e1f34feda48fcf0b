use criterion::{criterion_group, criterion_main, Criterion};
use ragatr_bench::corpus;
use ragatr_core::projection::{pca_2d, tsne_2d, TsneConfig};

fn projection(c: &mut Criterion) {
    let records = corpus(3, 100, 32, 4);
    let mut group = c.benchmark_group("projection");
    group.sample_size(10);
    group.bench_function("tsne_300x32", |b| {
        b.iter(|| tsne_2d(&records, &TsneConfig::default()).unwrap())
    });
    group.bench_function("pca_300x32", |b| b.iter(|| pca_2d(&records).unwrap()));
    group.finish();
}

criterion_group!(benches, projection);
criterion_main!(benches);
