//! Criterion benchmarks for the metric kernels live in `benches/`.
