use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ldscope::extract::{field_ridges, FieldRidgeConfig};
use ldscope::io::{decode_field, encode_field};
use ldscope::{Layer, Operator};
use ldscope_bench::vanderpol_field;

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("vanderpol_41x41_tau5", |b| b.iter(|| vanderpol_field(black_box(41), 5.0)));
    g.finish();
}

fn ridges(c: &mut Criterion) {
    let f = vanderpol_field(201, 5.0);
    for op in [Operator::GradientNorm, Operator::Laplacian] {
        let cfg = FieldRidgeConfig::new(Layer::Total, op, 95.0);
        c.bench_function(&format!("ridges_201x201_{}", op.as_str()), |b| {
            b.iter(|| field_ridges(black_box(&f), &cfg).unwrap())
        });
    }
}

fn codec(c: &mut Criterion) {
    let f = vanderpol_field(201, 1.0);
    let bytes = encode_field(&f).unwrap();
    c.bench_function("encode_201x201", |b| b.iter(|| encode_field(black_box(&f)).unwrap()));
    c.bench_function("decode_201x201", |b| b.iter(|| decode_field(black_box(&bytes)).unwrap()));
}

criterion_group!(benches, sweep, ridges, codec);
criterion_main!(benches);
