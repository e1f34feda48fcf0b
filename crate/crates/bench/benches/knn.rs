use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ragatr_bench::{corpus, queries};
use ragatr_core::{Index, MetadataFilter};

fn knn(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn");
    for &(n_per, dim) in &[(100, 64), (1000, 64), (1000, 512)] {
        let index = Index::build(corpus(10, n_per, dim, 1)).unwrap();
        let qs = queries(16, dim, 2);
        let filter = MetadataFilter::all();
        group.throughput(Throughput::Elements(qs.len() as u64));
        group.bench_with_input(BenchmarkId::new(format!("dim{dim}"), index.len()), &index, |b, index| {
            b.iter(|| {
                for q in &qs {
                    criterion::black_box(index.knn(q, 5, &filter).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn filtered(c: &mut Criterion) {
    let index = Index::build(corpus(10, 1000, 64, 1)).unwrap();
    let qs = queries(16, 64, 3);
    let filter: MetadataFilter = "target_type=C3,depression_deg>=16".parse().unwrap();
    c.bench_function("knn_filtered/10000", |b| {
        b.iter(|| {
            for q in &qs {
                criterion::black_box(index.knn(q, 5, &filter).unwrap());
            }
        })
    });
}

criterion_group!(benches, knn, filtered);
criterion_main!(benches);
