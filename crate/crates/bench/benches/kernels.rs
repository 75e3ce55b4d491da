use std::hint::black_box;

use aaerec::eval::{corrupt, mrr};
use aaerec::linalg::{gram, spmm, truncated_svd};
use aaerec::neural::{bce, init_mlp2, Activation, Mode};
use aaerec::{DenseMatrix, SparseBinaryMatrix};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sparse(rows: usize, cols: usize, per_row: usize, seed: u64) -> SparseBinaryMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<usize>> = (0..rows)
        .map(|_| (0..per_row).map(|_| rng.random_range(0..cols)).collect())
        .collect();
    SparseBinaryMatrix::from_rows(cols, &rows).unwrap()
}

fn dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DenseMatrix::zeros(rows, cols);
    m.values_mut().iter_mut().for_each(|v| *v = rng.random::<f64>());
    m
}

fn linalg(c: &mut Criterion) {
    let x = sparse(5_000, 1_000, 8, 1);
    c.bench_function("gram 5000x1000", |b| b.iter(|| gram(black_box(&x)).unwrap()));

    let cooc = gram(&x).unwrap();
    let q = sparse(500, 1_000, 8, 2);
    c.bench_function("spmm 500x1000 * 1000x1000", |b| {
        b.iter(|| spmm(black_box(&q), black_box(&cooc)).unwrap())
    });

    let m = x.to_dense();
    c.bench_function("truncated_svd 5000x1000 k=50", |b| {
        b.iter(|| truncated_svd(black_box(&m), 50, 0).unwrap())
    });
}

fn neural(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = init_mlp2(1_000, 100, 50, Activation::Linear, 0.2, &mut rng);
    let input = sparse(100, 1_000, 8, 4).to_dense();
    c.bench_function("mlp2 forward+backward batch 100", |b| {
        b.iter(|| {
            let (out, cache) = net.forward(black_box(&input), Mode::Train, &mut rng).unwrap();
            net.backward(&cache.unwrap(), &out).unwrap()
        })
    });

    let pred = dense(100, 1_000, 5);
    let target = sparse(100, 1_000, 8, 6).to_dense();
    c.bench_function("bce 100x1000", |b| {
        b.iter(|| bce(black_box(&pred), black_box(&target)).unwrap())
    });
}

fn ranking(c: &mut Criterion) {
    let x = sparse(2_000, 1_000, 8, 7);
    let corrupted = corrupt(&x, 0).unwrap();
    let scores = dense(2_000, 1_000, 8);
    c.bench_function("mrr 2000x1000", |b| {
        b.iter(|| mrr(black_box(&scores), black_box(&corrupted)).unwrap())
    });
}

criterion_group!(benches, linalg, neural, ranking);
criterion_main!(benches);
