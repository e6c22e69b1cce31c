use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use twisted_haar::geometry::{raw_shard, verify_partition, Case};
use twisted_haar::martingale::square_fn_dyadic_sq;
use twisted_haar_bench::{euclid_fixture, nil_fixture, staircase_specs};

fn euclid(c: &mut Criterion) {
    let mut g = c.benchmark_group("euclid");
    for res in [4, 6] {
        let (e, f) = euclid_fixture(res);
        let w = e.full_window();
        let ff = f.to_float();
        g.bench_with_input(BenchmarkId::new("analyze_exact", res), &res, |b, _| b.iter(|| e.analyze(black_box(&f), 2, &w).unwrap()));
        g.bench_with_input(BenchmarkId::new("analyze_float", res), &res, |b, _| b.iter(|| e.analyze(black_box(&ff), 2, &w).unwrap()));
        g.bench_with_input(BenchmarkId::new("frame_exact", res), &res, |b, _| b.iter(|| e.frame_apply(black_box(&f), &w).unwrap()));
        g.bench_with_input(BenchmarkId::new("square_fn_exact", res), &res, |b, _| {
            b.iter(|| square_fn_dyadic_sq(&e, black_box(&f), 3, &w).unwrap())
        });
    }
    g.finish();
}

fn nilpotent(c: &mut Criterion) {
    let (sys, f) = nil_fixture(2);
    let w = sys.full_window();
    let ff = f.to_float();
    let mut g = c.benchmark_group("nilpotent");
    g.sample_size(10);
    g.bench_function("frame_exact_desk", |b| b.iter(|| sys.frame(black_box(&f), &w).unwrap()));
    g.bench_function("frame_float_desk", |b| b.iter(|| sys.frame(black_box(&ff), &w).unwrap()));
    g.bench_function("shard_labels_type3", |b| b.iter(|| sys.shard_labels(3, [1, 2, 1]).unwrap()));
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let specs = staircase_specs(1);
    let mut g = c.benchmark_group("geometry");
    g.bench_function("raw_shard_case3", |b| b.iter(|| raw_shard(Case::III, &specs, black_box([1, 0, 2])).unwrap()));
    g.bench_function("partition_case2", |b| b.iter(|| verify_partition(Case::II, &specs, black_box([2, 0, 1]), None, false).unwrap()));
    g.finish();
}

criterion_group!(benches, euclid, nilpotent, geometry);
criterion_main!(benches);
