//! Criterion benchmarks for the aaerec kernels live in `benches/`.
